#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "prefopt/core.hpp"
#include "prefopt/datagen.hpp"
#include "prefopt/loss_zoo.hpp"
#include "prefopt/optimizer.hpp"

namespace prefopt {

// Enumeration ceiling for the exact expectations; exceeding it raises
// budget_error rather than silently sampling.
struct EnumerationBudget {
  std::uint64_t max_triples = 50'000'000;
};

// Exact population loss L_mu(pi) = E[l(omega * margin)] by triple enumeration
// over the generative model.
double population_loss(const PolicyView& policy, const GenerativeModel& model,
                       const LossSpec& loss, const BasePolicy& base,
                       const EnumerationBudget& budget = {});

// L_mu(policy) - L_mu(pi_star); >= 0 up to roundoff on realizable instances.
double excess_loss(const PolicyView& policy, const PolicyView& pi_star,
                   const GenerativeModel& model, const LossSpec& loss, const BasePolicy& base,
                   const EnumerationBudget& budget = {});

enum class GapUnder { Data, PiStar };

struct CenteredGapResult {
  double single = 0.0;    // E[(dRbar)^2] under the chosen y-distribution
  double pairwise = 0.0;  // E[(dR(y) - dR(y'))^2], y,y' i.i.d. from it
};

// Squared centered-reward gap between policy and pi_star; centering is always
// under D_y per context.
CenteredGapResult centered_gap(const PolicyView& policy, const PolicyView& pi_star,
                               const GenerativeModel& model, GapUnder under);

enum class CoverageVariant { DensityRatio, LinearEigenvalue, EmpiricalRatio };

std::string to_string(CoverageVariant v);
CoverageVariant coverage_variant_from_string(const std::string& name);

struct CoverageResult {
  double value = 1.0;
  bool infinite = false;
};

// sup over the pi_star support of pi_star(y|x) / D_y(y|x).
CoverageResult coverage_density_ratio(const PolicyView& pi_star, const GenerativeModel& model);

// lambda_max of the symmetrically whitened second moment
// Sigma_y^{-1/2} Sigma_{pi*} Sigma_y^{-1/2}; infinite when pi_star puts
// feature mass outside the data second-moment range.
CoverageResult coverage_linear_eigenvalue(const FeatureTable& features, const PolicyView& pi_star,
                                          const GenerativeModel& model);

// centered_gap under pi_star divided by centered_gap under data: the tightest
// valid constant for this specific policy pair.
CoverageResult coverage_empirical_ratio(const PolicyView& policy, const PolicyView& pi_star,
                                        const GenerativeModel& model);

struct TheoremBound {
  double total = 0.0;
  double term_sqrt_eps = 0.0;   // sqrt(eps / c_mu)
  double term_sqrt_ceps = 0.0;  // sqrt(C eps / c_mu)
  double term_exp = 0.0;        // (e^R / 2) C eps / c_mu
  bool unbounded = false;       // c_mu <= 0 or C infinite
};

// The KL sub-optimality bound. Negative eps within roundoff is clamped to 0.
TheoremBound theorem_bound(double epsilon, double c_mu, double coverage_C, double range_R);

// E_x[KL(pi_star || policy)], exact.
double kl_to_benchmark(const PolicyView& pi_star, const PolicyView& policy,
                       std::span<const double> d_x);

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct VerifyOptions {
  CoverageVariant coverage = CoverageVariant::DensityRatio;
  const FeatureTable* features = nullptr;    // required for LinearEigenvalue
  std::optional<double> c_mu_override;
  std::optional<double> range_override;      // exponent range override
  EnumerationBudget budget;
};

struct DiagnosticsReport {
  double epsilon = 0.0;
  double c_mu = 0.0;              // min curvature over the measured margin range
  bool c_mu_degenerate = false;
  double c_mu_at_margins = 0.0;   // point estimate at the data-mean |margin|
  double c_mu_scaled_argument = 0.0;  // same, in the beta*z argument convention
  double range_R_measured = 0.0;  // max |margin| on the support, both policies
  double range_R_exponent = 0.0;  // range entering e^R (also covers max |dRbar|)
  double coverage_C = 1.0;
  bool coverage_infinite = false;
  std::string coverage_variant;
  double kl_actual = 0.0;
  double centered_gap_data = 0.0;
  double centered_gap_pairwise = 0.0;
  double centered_gap_pistar = 0.0;
  double log_partition_gap = 0.0;  // E_x |log Zbar_pi / Zbar_star|
  TheoremBound bound;
  LemmaCheck lemma1;   // E_D[dRbar^2]      <= 2 eps / c_mu
  LemmaCheck lemma2;   // KL                <= sqrt(2C E_D[dRbar^2]) + log-partition gap
  LemmaCheck lemma3;   // log-partition gap <= sqrt(C eps/c_mu) + (e^R/2) C eps/c_mu
  LemmaCheck theorem;  // KL                <= theorem bound
};

// Full verification pass: all exact quantities plus the Theorem-1 / Lemma 1-3
// inequality checks (1e-9 slack). Violations are reported, never thrown.
DiagnosticsReport verify_lemmas(const PolicyView& policy, const PolicyView& pi_star,
                                const GenerativeModel& model, const LossSpec& loss,
                                const BasePolicy& base, const VerifyOptions& options = {});

struct Table2Estimate {
  double range_estimate = 0.0;       // mean |margin| over the final logged batch
  double c_mu_estimate = 0.0;        // loss curvature at that margin
  double c_mu_estimate_scaled = 0.0; // curvature in the beta*z argument (/ beta^2)
  double range_conservative = 0.0;   // max |margin| over the final logged batch
  double c_mu_conservative = 0.0;    // min curvature over the conservative range
};

Table2Estimate estimate_table2(const TrainTrace& trace, const LossSpec& loss);

}  // namespace prefopt
