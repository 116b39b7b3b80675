#pragma once

#include <functional>
#include <optional>
#include <string>

#include "prefopt/core.hpp"

namespace prefopt {

struct LossParams {
  double beta = 1.0;
  double tau = 0.0;
  double gamma = 0.0;
};

// A preference loss on the margin domain, with value/derivative/curvature and,
// for proper losses, the link g(eta) = argmin_v eta*l(v) + (1-eta)*l(-v) and
// its inverse. Immutable value object; evaluations are pure.
struct LossSpec {
  std::string name;
  LossParams params;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> curvature;
  std::optional<std::function<double(double)>> link;          // (0,1) -> R
  std::optional<std::function<double(double)>> inverse_link;  // R -> (0,1)
  bool curvature_degenerate = false;  // a.e.-zero curvature (hinge)

  bool proper() const { return link.has_value(); }
};

// l(z) = log(1 + exp(-beta z)); link (1/beta) ln(eta/(1-eta)).
LossSpec logistic_loss(double beta);

// l(z) = (beta z - 1)^2; constant curvature 2 beta^2; link (2 eta - 1)/beta.
// beta = 1 is the normalized form (z-1)^2 with link 2 eta - 1.
LossSpec squared_loss(double beta);

// l(z) = (z - tau)^2; link tau (2 eta - 1). Coincides with squared_loss under
// tau = 1/beta up to the overall beta^2 factor.
LossSpec ipo_loss(double tau);

// l(z) = max(tau - z, 0); subgradient 0 at the kink; no link (not strictly
// proper), curvature degenerate.
LossSpec hinge_loss(double tau);

// l(z) = log(1 + exp(-(beta z - gamma))); the margin-offset logistic used by
// the SimPO row (without length normalization). Link solved numerically.
LossSpec shifted_logistic_loss(double beta, double gamma);

// A convex shape f for the GPO wrapper l(z) = f(beta z). f must come with its
// derivative; curvature optional (nullptr -> finite differences of f_prime).
struct GpoShape {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  std::function<double(double)> f_curv;
  std::optional<std::function<double(double)>> f_link;  // link of f itself, if known
};

LossSpec gpo_loss(const GpoShape& shape, double beta);

// Exponential-family preference model P(omega|v) = exp(omega v - phi(v)).
struct ExponentialFamilySpec {
  std::string name;
  std::function<double(double)> phi;               // strictly convex log-partition
  std::function<double(double)> phi_grad;          // strictly increasing
  std::function<double(double)> phi_grad_inverse;  // inverse of phi_grad
};

// Loss induced by the family: value(z) = phi(z) - z - inf(phi - id), so the
// value is >= 0; link(eta) = phi_grad_inverse(2 eta - 1).
LossSpec from_exponential_family(const ExponentialFamilySpec& spec);

ExponentialFamilySpec btl_family();       // phi(v) = log(e^v + e^-v)
ExponentialFamilySpec gaussian_family();  // phi(v) = v^2 / 2

// ---------------------------------------------------------------------------
// Method catalog
// ---------------------------------------------------------------------------

enum class Method { Dpo, Ipo, Slic, Gpo, Cpo, Rdpo, OdpoIdentity, SimpoNoLennorm };

Method method_from_string(const std::string& name);
std::string to_string(Method m);

enum class PresetRegularizer { None, CeToReference, CeToPreferred };

struct MethodPreset {
  Method method;
  LossSpec loss;
  BaseKind base_kind;
  PresetRegularizer regularizer;
  LossParams params;
};

// The catalog row for a method; GPO needs a shape and uses the logistic shape
// by default when none is supplied.
MethodPreset preset(Method method, const LossParams& params = {},
                    const std::optional<GpoShape>& gpo_shape = std::nullopt);

struct MinCurvature {
  double value = 0.0;
  bool degenerate = false;  // no usable curvature (hinge-type)
};

// inf of curvature over [-range_R, range_R]: 2001-point grid (resolution
// 1e-3 * range_R) plus one local refinement pass.
MinCurvature min_curvature(const LossSpec& loss, double range_R);

}  // namespace prefopt
