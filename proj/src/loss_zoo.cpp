#include "prefopt/loss_zoo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prefopt {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(w)) without overflow.
double softplus(double w) {
  if (w > 0.0) return w + std::log1p(std::exp(-w));
  return std::log1p(std::exp(w));
}

void require_prob(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("link: eta outside [0,1]");
}

// Solve increasing f(v) = 0 by expanding bracket then bisecting.
double bisect_increasing(const std::function<double(double)>& f) {
  double lo = -1.0, hi = 1.0;
  for (int i = 0; i < 120 && f(lo) > 0.0; ++i) lo *= 2.0;
  for (int i = 0; i < 120 && f(hi) < 0.0; ++i) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LossSpec logistic_loss(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("logistic_loss: beta must be > 0");
  LossSpec l;
  l.name = "logistic";
  l.params.beta = beta;
  l.value = [beta](double z) { return softplus(-beta * z); };
  l.derivative = [beta](double z) { return -beta * sigmoid(-beta * z); };
  l.curvature = [beta](double z) {
    return beta * beta * sigmoid(beta * z) * sigmoid(-beta * z);
  };
  l.link = [beta](double eta) {
    require_prob(eta);
    return std::log(eta / (1.0 - eta)) / beta;
  };
  l.inverse_link = [beta](double v) { return sigmoid(beta * v); };
  return l;
}

LossSpec squared_loss(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("squared_loss: beta must be > 0");
  LossSpec l;
  l.name = "squared";
  l.params.beta = beta;
  l.value = [beta](double z) {
    const double d = beta * z - 1.0;
    return d * d;
  };
  l.derivative = [beta](double z) { return 2.0 * beta * (beta * z - 1.0); };
  l.curvature = [beta](double) { return 2.0 * beta * beta; };
  l.link = [beta](double eta) {
    require_prob(eta);
    return (2.0 * eta - 1.0) / beta;
  };
  l.inverse_link = [beta](double v) { return 0.5 * (1.0 + beta * v); };
  return l;
}

LossSpec ipo_loss(double tau) {
  LossSpec l;
  l.name = "ipo";
  l.params.tau = tau;
  l.value = [tau](double z) {
    const double d = z - tau;
    return d * d;
  };
  l.derivative = [tau](double z) { return 2.0 * (z - tau); };
  l.curvature = [](double) { return 2.0; };
  if (tau != 0.0) {
    l.link = [tau](double eta) {
      require_prob(eta);
      return tau * (2.0 * eta - 1.0);
    };
    l.inverse_link = [tau](double v) { return 0.5 * (1.0 + v / tau); };
  }
  return l;
}

LossSpec hinge_loss(double tau) {
  LossSpec l;
  l.name = "hinge";
  l.params.tau = tau;
  l.value = [tau](double z) { return std::max(tau - z, 0.0); };
  // subgradient 0 at the kink
  l.derivative = [tau](double z) { return z < tau ? -1.0 : 0.0; };
  l.curvature = [](double) { return 0.0; };
  l.curvature_degenerate = true;
  return l;
}

LossSpec shifted_logistic_loss(double beta, double gamma) {
  if (!(beta > 0.0)) throw std::invalid_argument("shifted_logistic_loss: beta must be > 0");
  LossSpec l;
  l.name = "shifted_logistic";
  l.params.beta = beta;
  l.params.gamma = gamma;
  l.value = [beta, gamma](double z) { return softplus(gamma - beta * z); };
  l.derivative = [beta, gamma](double z) { return -beta * sigmoid(gamma - beta * z); };
  l.curvature = [beta, gamma](double z) {
    const double w = gamma - beta * z;
    return beta * beta * sigmoid(w) * sigmoid(-w);
  };
  // Stationarity of eta*l(v) + (1-eta)*l(-v):
  //   eta * sigmoid(gamma - beta v) = (1 - eta) * sigmoid(gamma + beta v),
  // giving the closed inverse and a monotone equation for the forward link.
  l.inverse_link = [beta, gamma](double v) {
    const double a = sigmoid(gamma + beta * v), b = sigmoid(gamma - beta * v);
    return a / (a + b);
  };
  l.link = [beta, gamma](double eta) {
    require_prob(eta);
    if (eta <= 0.0 || eta >= 1.0)
      throw std::invalid_argument("shifted_logistic link: eta must be interior");
    return bisect_increasing([beta, gamma, eta](double v) {
      return (1.0 - eta) * sigmoid(gamma + beta * v) - eta * sigmoid(gamma - beta * v);
    });
  };
  return l;
}

LossSpec gpo_loss(const GpoShape& shape, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("gpo_loss: beta must be > 0");
  if (!shape.f) throw std::invalid_argument("gpo_loss: shape has no value function");
  if (!shape.f_prime) throw std::invalid_argument("gpo_loss: shape has no derivative");
  LossSpec l;
  l.name = "gpo:" + shape.name;
  l.params.beta = beta;
  auto f = shape.f;
  auto fp = shape.f_prime;
  l.value = [f, beta](double z) { return f(beta * z); };
  l.derivative = [fp, beta](double z) { return beta * fp(beta * z); };
  if (shape.f_curv) {
    auto fc = shape.f_curv;
    l.curvature = [fc, beta](double z) { return beta * beta * fc(beta * z); };
  } else {
    l.curvature = [fp, beta](double z) {
      const double u = beta * z;
      const double h = 1e-6 * std::max(1.0, std::abs(u));
      return beta * beta * (fp(u + h) - fp(u - h)) / (2.0 * h);
    };
  }
  if (shape.f_link) {
    auto fl = *shape.f_link;
    l.link = [fl, beta](double eta) { return fl(eta) / beta; };
  }
  return l;
}

LossSpec from_exponential_family(const ExponentialFamilySpec& spec) {
  if (!spec.phi || !spec.phi_grad || !spec.phi_grad_inverse)
    throw std::invalid_argument("from_exponential_family: incomplete spec");

  // Convexity and inverse checks on a coarse sample of the natural domain.
  double prev = spec.phi_grad(-8.0);
  bool odd_grad = true;
  for (int i = 1; i <= 32; ++i) {
    const double v = -8.0 + 0.5 * i;
    const double g = spec.phi_grad(v);
    if (g < prev - 1e-12)
      throw std::invalid_argument("from_exponential_family: phi is not convex");
    prev = g;
    if (std::abs(spec.phi_grad(v) + spec.phi_grad(-v)) > 1e-9) odd_grad = false;
    if (std::abs(spec.phi_grad_inverse(g) - v) > 1e-9)
      throw std::invalid_argument("from_exponential_family: phi_grad_inverse is not an inverse");
  }

  // Offset so the induced loss is >= 0 on any margin domain inside [-60, 60]:
  // phi(v) - v is minimized where phi_grad(v) = 1.
  double offset;
  if (spec.phi_grad(60.0) <= 1.0) {
    offset = spec.phi(60.0) - 60.0;
  } else if (spec.phi_grad(-60.0) >= 1.0) {
    offset = spec.phi(-60.0) + 60.0;
  } else {
    double lo = -60.0, hi = 60.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (spec.phi_grad(mid) < 1.0 ? lo : hi) = mid;
    }
    const double v = 0.5 * (lo + hi);
    offset = spec.phi(v) - v;
  }

  LossSpec l;
  l.name = "expfam:" + spec.name;
  auto phi = spec.phi;
  auto grad = spec.phi_grad;
  auto grad_inv = spec.phi_grad_inverse;
  l.value = [phi, offset](double z) { return phi(z) - z - offset; };
  l.derivative = [grad](double z) { return grad(z) - 1.0; };
  l.curvature = [grad](double z) {
    const double h = 1e-5 * std::max(1.0, std::abs(z));
    return (grad(z + h) - grad(z - h)) / (2.0 * h);
  };
  if (odd_grad) {
    // For even phi the composed loss l(omega v) matches the likelihood loss
    // phi(v) - omega v, so the Assumption-3 link is phi_grad^{-1}(E[omega]).
    l.link = [grad_inv](double eta) {
      require_prob(eta);
      return grad_inv(2.0 * eta - 1.0);
    };
    l.inverse_link = [grad](double v) { return 0.5 * (1.0 + grad(v)); };
  }
  return l;
}

ExponentialFamilySpec btl_family() {
  ExponentialFamilySpec s;
  s.name = "btl";
  s.phi = [](double v) {
    // log(e^v + e^-v), overflow-safe
    const double a = std::abs(v);
    return a + std::log1p(std::exp(-2.0 * a));
  };
  s.phi_grad = [](double v) { return std::tanh(v); };
  s.phi_grad_inverse = [](double m) { return std::atanh(m); };
  return s;
}

ExponentialFamilySpec gaussian_family() {
  ExponentialFamilySpec s;
  s.name = "gaussian";
  s.phi = [](double v) { return 0.5 * v * v; };
  s.phi_grad = [](double v) { return v; };
  s.phi_grad_inverse = [](double m) { return m; };
  return s;
}

Method method_from_string(const std::string& name) {
  std::string key;
  for (char c : name)
    if (std::isalnum(static_cast<unsigned char>(c)))
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key == "dpo") return Method::Dpo;
  if (key == "ipo") return Method::Ipo;
  if (key == "slic" || key == "slichf") return Method::Slic;
  if (key == "gpo") return Method::Gpo;
  if (key == "cpo") return Method::Cpo;
  if (key == "rdpo") return Method::Rdpo;
  if (key == "odpoidentity" || key == "odpo") return Method::OdpoIdentity;
  if (key == "simponolennorm" || key == "simpo") return Method::SimpoNoLennorm;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Dpo: return "DPO";
    case Method::Ipo: return "IPO";
    case Method::Slic: return "SLiC";
    case Method::Gpo: return "GPO";
    case Method::Cpo: return "CPO";
    case Method::Rdpo: return "R-DPO";
    case Method::OdpoIdentity: return "ODPO-identity";
    case Method::SimpoNoLennorm: return "SimPO-no-lennorm";
  }
  return "unknown";
}

MethodPreset preset(Method method, const LossParams& params,
                    const std::optional<GpoShape>& gpo_shape) {
  MethodPreset p;
  p.method = method;
  p.params = params;
  const double beta = params.beta;
  const double tau = params.tau;
  switch (method) {
    case Method::Dpo:
      p.loss = logistic_loss(beta);
      p.base_kind = BaseKind::Reference;
      p.regularizer = PresetRegularizer::None;
      break;
    case Method::Ipo:
      p.loss = ipo_loss(tau != 0.0 ? tau : 1.0);
      p.base_kind = BaseKind::Reference;
      p.regularizer = PresetRegularizer::None;
      break;
    case Method::Slic:
      p.loss = hinge_loss(tau != 0.0 ? tau : 1.0);
      p.base_kind = BaseKind::Uniform;
      p.regularizer = PresetRegularizer::CeToReference;
      break;
    case Method::Gpo: {
      if (gpo_shape) {
        p.loss = gpo_loss(*gpo_shape, beta);
      } else {
        GpoShape logistic_shape;
        logistic_shape.name = "logistic";
        logistic_shape.f = [](double u) { return softplus(-u); };
        logistic_shape.f_prime = [](double u) { return -sigmoid(-u); };
        logistic_shape.f_curv = [](double u) { return sigmoid(u) * sigmoid(-u); };
        logistic_shape.f_link = [](double eta) {
          require_prob(eta);
          return std::log(eta / (1.0 - eta));
        };
        p.loss = gpo_loss(logistic_shape, beta);
      }
      p.base_kind = BaseKind::Reference;
      p.regularizer = PresetRegularizer::None;
      break;
    }
    case Method::Cpo:
      p.loss = logistic_loss(beta);
      p.base_kind = BaseKind::Uniform;
      p.regularizer = PresetRegularizer::CeToPreferred;
      break;
    case Method::Rdpo:
      p.loss = logistic_loss(beta);
      p.base_kind = BaseKind::LengthPenalized;
      p.regularizer = PresetRegularizer::None;
      break;
    case Method::OdpoIdentity:
      p.loss = logistic_loss(beta);
      p.base_kind = BaseKind::ScoreWeighted;
      p.regularizer = PresetRegularizer::None;
      break;
    case Method::SimpoNoLennorm:
      p.loss = shifted_logistic_loss(beta, params.gamma);
      p.base_kind = BaseKind::Uniform;
      p.regularizer = PresetRegularizer::None;
      break;
  }
  return p;
}

MinCurvature min_curvature(const LossSpec& loss, double range_R) {
  if (!(range_R > 0.0)) throw std::invalid_argument("min_curvature: range_R must be > 0");
  if (loss.curvature_degenerate) return {0.0, true};

  constexpr int kPoints = 2001;
  const double step = 2.0 * range_R / (kPoints - 1);
  double best = std::numeric_limits<double>::infinity();
  double best_z = -range_R;
  for (int i = 0; i < kPoints; ++i) {
    const double z = -range_R + step * i;
    const double c = loss.curvature(z);
    if (c < best) {
      best = c;
      best_z = z;
    }
  }
  // one refinement pass around the coarse minimum
  const double lo = std::max(-range_R, best_z - step);
  const double hi = std::min(range_R, best_z + step);
  constexpr int kFine = 101;
  for (int i = 0; i < kFine; ++i) {
    const double z = lo + (hi - lo) * i / (kFine - 1);
    best = std::min(best, loss.curvature(z));
  }
  return {best, false};
}

}  // namespace prefopt
