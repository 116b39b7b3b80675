#include "prefopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "prefopt/parallel.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

Matrix log_probs_of(const Matrix& logits) {
  Matrix logp(logits.rows(), logits.cols());
  for (int x = 0; x < logits.rows(); ++x) {
    const double lse = log_sum_exp(logits.row(x));
    for (int y = 0; y < logits.cols(); ++y) logp(x, y) = logits(x, y) - lse;
  }
  return logp;
}

void check_inputs(const PolicyView& policy, const PreferenceDataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset is empty");
  for (const auto& s : data.samples)
    validate_sample(s, policy.num_contexts(), policy.num_responses());
}

double kl_term(const Matrix& logp, const TabularPolicy& anchor, std::span<const double> d_x) {
  // KL(pi || anchor) under d_x
  double total = 0.0;
  for (int x = 0; x < logp.rows(); ++x) {
    if (d_x[static_cast<std::size_t>(x)] <= 0.0) continue;
    double kl = 0.0;
    for (int y = 0; y < logp.cols(); ++y)
      kl += std::exp(logp(x, y)) * (logp(x, y) - anchor.log_prob(x, y));
    total += d_x[static_cast<std::size_t>(x)] * kl;
  }
  return total;
}

double penalty_value(const Matrix& logp, const Regularizer& reg, std::span<const double> d_x) {
  switch (reg.kind) {
    case RegKind::None:
    case RegKind::L2Ball:
    case RegKind::CeConstraint:
      return 0.0;
    case RegKind::CePenalty:
      return reg.alpha * cross_entropy(*reg.anchor, PolicyView(logp), d_x);
    case RegKind::KlPenalty:
      return reg.coeff * kl_term(logp, *reg.anchor, d_x);
  }
  return 0.0;
}

// Adds the penalty gradient w.r.t. logits into grad.
void add_penalty_gradient(Matrix& grad, const Matrix& logp, const Regularizer& reg,
                          std::span<const double> d_x) {
  const int X = logp.rows(), Y = logp.cols();
  if (reg.kind == RegKind::CePenalty) {
    // d/dlogit(x,b) [ -sum_y pi0(y|x) log pi(y|x) ] = pi(b|x) - pi0(b|x)
    for (int x = 0; x < X; ++x) {
      const double w = reg.alpha * d_x[static_cast<std::size_t>(x)];
      if (w == 0.0) continue;
      for (int b = 0; b < Y; ++b)
        grad(x, b) += w * (std::exp(logp(x, b)) - reg.anchor->prob(x, b));
    }
  } else if (reg.kind == RegKind::KlPenalty) {
    // d/dlogit(x,b) KL(pi||pi0) = pi(b|x) (delta_b - sum_y pi(y|x) delta_y),
    // delta = log pi - log pi0
    for (int x = 0; x < X; ++x) {
      const double w = reg.coeff * d_x[static_cast<std::size_t>(x)];
      if (w == 0.0) continue;
      double mean_delta = 0.0;
      for (int y = 0; y < Y; ++y)
        mean_delta += std::exp(logp(x, y)) * (logp(x, y) - reg.anchor->log_prob(x, y));
      for (int b = 0; b < Y; ++b) {
        const double delta = logp(x, b) - reg.anchor->log_prob(x, b);
        grad(x, b) += w * std::exp(logp(x, b)) * (delta - mean_delta);
      }
    }
  }
}

void check_reg(const Regularizer& reg, int num_contexts, int num_responses) {
  if ((reg.kind == RegKind::CePenalty || reg.kind == RegKind::CeConstraint ||
       reg.kind == RegKind::KlPenalty)) {
    if (!reg.anchor) throw std::invalid_argument("regularizer needs an anchor policy");
    if (reg.anchor->num_contexts() != num_contexts ||
        reg.anchor->num_responses() != num_responses)
      throw std::invalid_argument("regularizer anchor shape mismatch");
  }
  if (reg.alpha < 0.0 || reg.lambda < 0.0 || reg.coeff < 0.0 || reg.radius < 0.0)
    throw std::invalid_argument("regularizer coefficients must be non-negative");
}

// Mean data loss over an index set (nullptr = whole dataset).
double data_loss(const Matrix& logp, const Matrix& logmu, const PreferenceDataset& data,
                 const LossSpec& loss, const std::vector<int>* batch) {
  const std::size_t n = batch ? batch->size() : data.size();
  const auto& samples = data.samples;
  const double total = par::sum(n, [&](std::size_t i) {
    const auto& s = samples[batch ? static_cast<std::size_t>((*batch)[i]) : i];
    const double m = margin_from_tables(logp, logmu, s.x, s.y, s.y_prime);
    return loss.value(s.omega * m);
  });
  return total / static_cast<double>(n);
}

// Data-loss gradient over an index set, accumulated into a logits-shaped
// buffer (row-major).
std::vector<double> data_gradient(const Matrix& logp, const Matrix& logmu,
                                  const PreferenceDataset& data, const LossSpec& loss,
                                  const std::vector<int>* batch) {
  const std::size_t n = batch ? batch->size() : data.size();
  const auto& samples = data.samples;
  const int Y = logp.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  return par::accumulate(n, logp.size(), [&](std::size_t i, std::vector<double>& acc) {
    const auto& s = samples[batch ? static_cast<std::size_t>((*batch)[i]) : i];
    const double m = margin_from_tables(logp, logmu, s.x, s.y, s.y_prime);
    // d/dlogit l(omega m): the softmax normalizers cancel inside the margin,
    // leaving +/- indicator terms.
    const double g = loss.derivative(s.omega * m) * s.omega * inv_n;
    acc[static_cast<std::size_t>(s.x) * Y + s.y] += g;
    acc[static_cast<std::size_t>(s.x) * Y + s.y_prime] -= g;
  });
}

}  // namespace

std::string to_string(RegKind kind) {
  switch (kind) {
    case RegKind::None: return "none";
    case RegKind::CePenalty: return "ce_penalty";
    case RegKind::CeConstraint: return "ce_constraint";
    case RegKind::L2Ball: return "l2_ball";
    case RegKind::KlPenalty: return "kl_penalty";
  }
  return "unknown";
}

Regularizer Regularizer::ce_penalty(std::shared_ptr<const TabularPolicy> anchor, double alpha) {
  Regularizer r;
  r.kind = RegKind::CePenalty;
  r.anchor = std::move(anchor);
  r.alpha = alpha;
  return r;
}

Regularizer Regularizer::ce_constraint(std::shared_ptr<const TabularPolicy> anchor,
                                       double lambda) {
  Regularizer r;
  r.kind = RegKind::CeConstraint;
  r.anchor = std::move(anchor);
  r.lambda = lambda;
  return r;
}

Regularizer Regularizer::kl_penalty(std::shared_ptr<const TabularPolicy> anchor, double coeff) {
  Regularizer r;
  r.kind = RegKind::KlPenalty;
  r.anchor = std::move(anchor);
  r.coeff = coeff;
  return r;
}

Regularizer Regularizer::l2_ball(double radius, std::optional<std::vector<double>> anchor_params) {
  Regularizer r;
  r.kind = RegKind::L2Ball;
  r.radius = radius;
  r.l2_anchor = std::move(anchor_params);
  return r;
}

std::vector<double> empirical_d_x(const PreferenceDataset& data, int num_contexts) {
  std::vector<double> d(static_cast<std::size_t>(num_contexts), 0.0);
  for (const auto& s : data.samples) d[static_cast<std::size_t>(s.x)] += 1.0;
  for (double& v : d) v /= static_cast<double>(data.size());
  return d;
}

double objective(const PolicyView& policy, const PreferenceDataset& data, const LossSpec& loss,
                 const BasePolicy& base, const Regularizer& reg) {
  check_inputs(policy, data);
  check_reg(reg, policy.num_contexts(), policy.num_responses());
  const Matrix logmu = base.log_weight_table(policy.num_contexts(), policy.num_responses());
  double value = data_loss(policy.log_probs(), logmu, data, loss, nullptr);
  if (reg.kind == RegKind::CePenalty || reg.kind == RegKind::KlPenalty) {
    const auto d_x = empirical_d_x(data, policy.num_contexts());
    value += penalty_value(policy.log_probs(), reg, d_x);
  }
  return value;
}

Matrix gradient(const TabularPolicy& policy, const PreferenceDataset& data, const LossSpec& loss,
                const BasePolicy& base, const Regularizer& reg) {
  const PolicyView view(policy);
  check_inputs(view, data);
  check_reg(reg, policy.num_contexts(), policy.num_responses());
  const Matrix logmu = base.log_weight_table(policy.num_contexts(), policy.num_responses());
  auto flat = data_gradient(policy.log_probs(), logmu, data, loss, nullptr);
  Matrix grad(policy.num_contexts(), policy.num_responses(), std::move(flat));
  if (reg.kind == RegKind::CePenalty || reg.kind == RegKind::KlPenalty) {
    const auto d_x = empirical_d_x(data, policy.num_contexts());
    add_penalty_gradient(grad, policy.log_probs(), reg, d_x);
  }
  return grad;
}

std::vector<double> gradient(const LinearSoftmaxPolicy& policy, const PreferenceDataset& data,
                             const LossSpec& loss, const BasePolicy& base,
                             const Regularizer& reg) {
  const PolicyView view(policy);
  check_inputs(view, data);
  check_reg(reg, policy.num_contexts(), policy.num_responses());
  const Matrix logmu = base.log_weight_table(policy.num_contexts(), policy.num_responses());
  // logit(x,y) = w . phi(x,y): chain rule maps the logit-space gradient
  // through the feature table.
  auto flat = data_gradient(policy.log_probs(), logmu, data, loss, nullptr);
  Matrix grad_logits(policy.num_contexts(), policy.num_responses(), std::move(flat));
  if (reg.kind == RegKind::CePenalty || reg.kind == RegKind::KlPenalty) {
    const auto d_x = empirical_d_x(data, policy.num_contexts());
    add_penalty_gradient(grad_logits, policy.log_probs(), reg, d_x);
  }
  std::vector<double> g(static_cast<std::size_t>(policy.dim()), 0.0);
  for (int x = 0; x < policy.num_contexts(); ++x)
    for (int y = 0; y < policy.num_responses(); ++y) {
      const double gl = grad_logits(x, y);
      if (gl == 0.0) continue;
      const auto f = policy.features().phi(x, y);
      for (int k = 0; k < policy.dim(); ++k) g[static_cast<std::size_t>(k)] += gl * f[k];
    }
  return g;
}

Matrix population_gradient(const TabularPolicy& policy, const GenerativeModel& model,
                           const LossSpec& loss, const BasePolicy& base) {
  const int X = model.num_contexts(), Y = model.num_responses();
  if (policy.num_contexts() != X || policy.num_responses() != Y)
    throw std::invalid_argument("population_gradient: shape mismatch");
  const Matrix logmu = base.log_weight_table(X, Y);
  const Matrix& logp = policy.log_probs();
  Matrix grad(X, Y, 0.0);
  for (int x = 0; x < X; ++x) {
    const double dx = model.d_x()[static_cast<std::size_t>(x)];
    if (dx == 0.0) continue;
    for (int y = 0; y < Y; ++y) {
      for (int yp = 0; yp < Y; ++yp) {
        const double w = dx * model.d_y()(x, y) * model.d_y()(x, yp);
        if (w == 0.0) continue;
        const double m = margin_from_tables(logp, logmu, x, y, yp);
        const double eta = model.preference_prob(x, y, yp);
        const double dl = eta * loss.derivative(m) - (1.0 - eta) * loss.derivative(-m);
        grad(x, y) += w * dl;
        grad(x, yp) -= w * dl;
      }
    }
  }
  return grad;
}

double cross_entropy(const TabularPolicy& anchor, const PolicyView& policy,
                     std::span<const double> d_x) {
  if (anchor.num_contexts() != policy.num_contexts() ||
      anchor.num_responses() != policy.num_responses())
    throw std::invalid_argument("cross_entropy: shape mismatch");
  Matrix w(anchor.num_contexts(), anchor.num_responses());
  for (int x = 0; x < w.rows(); ++x)
    for (int y = 0; y < w.cols(); ++y) w(x, y) = anchor.prob(x, y);
  return cross_entropy(w, policy, d_x);
}

double cross_entropy(const Matrix& y_weights, const PolicyView& policy,
                     std::span<const double> d_x) {
  if (y_weights.rows() != policy.num_contexts() || y_weights.cols() != policy.num_responses())
    throw std::invalid_argument("cross_entropy: weight shape mismatch");
  if (static_cast<int>(d_x.size()) != policy.num_contexts())
    throw std::invalid_argument("cross_entropy: d_x size mismatch");
  double ce = 0.0;
  for (int x = 0; x < y_weights.rows(); ++x) {
    const double dx = d_x[static_cast<std::size_t>(x)];
    if (dx <= 0.0) continue;
    for (int y = 0; y < y_weights.cols(); ++y) {
      const double q = y_weights(x, y);
      if (q <= 0.0) continue;
      ce -= dx * q * policy.log_prob(x, y);  // -inf propagates as overflow flag
    }
  }
  return ce;
}

namespace {

// Shared training core over a generic parameter vector. Rebuild materializes
// log-probs from parameters; to_logit_grad maps a logit-space gradient into
// parameter space.
struct TrainCore {
  const PreferenceDataset& data;
  const LossSpec& loss;
  const Matrix logmu;
  const TrainConfig& config;
  std::vector<double> d_x_hat;

  TrainTrace trace;

  template <typename Rebuild, typename ParamGrad>
  std::vector<double> run(std::vector<double> theta, const Regularizer& reg, Rebuild&& rebuild,
                          ParamGrad&& param_grad) {
    const std::size_t n = data.size();
    std::vector<double> theta0 =
        reg.kind == RegKind::L2Ball && reg.l2_anchor ? *reg.l2_anchor : theta;
    if (theta0.size() != theta.size())
      throw std::invalid_argument("train: l2 anchor size mismatch");

    Rng rng(config.seed);
    Matrix logp = rebuild(theta);
    log_row(0, logp, theta, theta0, reg);

    const bool full_batch = config.batch_size == static_cast<int>(n);
    std::vector<int> batch;

    for (int step = 0; step < config.steps; ++step) {
      const std::vector<int>* batch_ptr = nullptr;
      if (!full_batch) {
        batch.resize(static_cast<std::size_t>(config.batch_size));
        for (int& idx : batch) idx = rng.uniform_index(static_cast<int>(n));
        batch_ptr = &batch;
      }

      auto flat = data_gradient(logp, logmu, data, loss, batch_ptr);
      Matrix grad_logits(logp.rows(), logp.cols(), std::move(flat));
      if (reg.kind == RegKind::CePenalty || reg.kind == RegKind::KlPenalty)
        add_penalty_gradient(grad_logits, logp, reg, d_x_hat);
      const std::vector<double> g = param_grad(grad_logits, theta);

      const std::vector<double> theta_prev = theta;
      const double lr = config.learning_rate * config.schedule.factor(step);
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * g[k];

      if (reg.kind == RegKind::L2Ball) project_l2(theta, theta0, reg.radius);

      bool finite = true;
      for (double v : theta)
        if (!std::isfinite(v)) finite = false;
      if (!finite) {
        trace.diverged = true;
        theta = theta_prev;  // keep the last finite parameters
        break;
      }
      logp = rebuild(theta);

      const bool last = step + 1 == config.steps;
      if ((step + 1) % std::max(1, config.trace_every) == 0 || last) {
        log_row(step + 1, logp, theta, theta0, reg);
        if (!std::isfinite(trace.rows.back().loss)) {
          trace.diverged = true;
          break;
        }
      }
    }
    return theta;
  }

  static void project_l2(std::vector<double>& theta, const std::vector<double>& theta0,
                         double radius) {
    double sq = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double d = theta[k] - theta0[k];
      sq += d * d;
    }
    const double dist = std::sqrt(sq);
    if (dist <= radius) return;
    const double scale = radius == 0.0 ? 0.0 : radius / dist;
    for (std::size_t k = 0; k < theta.size(); ++k)
      theta[k] = theta0[k] + scale * (theta[k] - theta0[k]);
  }

  void log_row(int step, const Matrix& logp, const std::vector<double>& theta,
               const std::vector<double>& theta0, const Regularizer& reg) {
    TraceRow row;
    row.step = step;
    row.loss = data_loss(logp, logmu, data, loss, nullptr) + penalty_value(logp, reg, d_x_hat);

    const std::size_t n = data.size();
    const auto& samples = data.samples;
    row.logp_preferred = par::sum(n, [&](std::size_t i) {
                           const auto& s = samples[i];
                           return logp(s.x, s.omega == 1 ? s.y : s.y_prime);
                         }) /
                         static_cast<double>(n);
    row.logp_dispreferred = par::sum(n, [&](std::size_t i) {
                              const auto& s = samples[i];
                              return logp(s.x, s.omega == 1 ? s.y_prime : s.y);
                            }) /
                            static_cast<double>(n);
    row.mean_abs_margin = par::sum(n, [&](std::size_t i) {
                            const auto& s = samples[i];
                            return std::abs(
                                margin_from_tables(logp, logmu, s.x, s.y, s.y_prime));
                          }) /
                          static_cast<double>(n);
    row.max_abs_margin = par::max(
        n,
        [&](std::size_t i) {
          const auto& s = samples[i];
          return std::abs(margin_from_tables(logp, logmu, s.x, s.y, s.y_prime));
        },
        0.0);
    row.curvature_at_margin = loss.curvature(row.mean_abs_margin);
    double sq = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double d = theta[k] - theta0[k];
      sq += d * d;
    }
    row.param_dist = std::sqrt(sq);
    trace.rows.push_back(row);
  }
};

// Penalty-doubling wrapper for the CE constraint; restarts from init for
// determinism.
template <typename RunOnce>
TrainTrace constrained_outer(const Regularizer& reg, RunOnce&& run_once,
                             const std::function<double()>& measure_ce) {
  double alpha = reg.alpha > 0.0 ? reg.alpha : 1.0;
  TrainTrace last;
  for (int round = 0;; ++round) {
    Regularizer penalty = Regularizer::ce_penalty(reg.anchor, alpha);
    last = run_once(penalty);
    last.ce_doublings = round;
    last.final_penalty_alpha = alpha;
    const double ce = measure_ce();
    if (ce <= reg.lambda + 1e-9) {
      last.constraint_satisfied = true;
      return last;
    }
    if (round >= 40) {
      last.constraint_satisfied = false;
      return last;
    }
    alpha *= 2.0;
  }
}

void check_config(const TrainConfig& config, std::size_t n) {
  if (config.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
  if (config.steps > 0) {
    if (config.batch_size < 1 || config.batch_size > static_cast<int>(n))
      throw std::invalid_argument("train: batch_size must be in [1, n]");
    if (!(config.learning_rate > 0.0))
      throw std::invalid_argument("train: learning_rate must be > 0");
  }
  if (config.schedule.kind == Schedule::Kind::LinearWarmup &&
      config.schedule.warmup_steps > std::max(config.steps, 1))
    throw std::invalid_argument("train: warmup_steps must be <= steps");
}

}  // namespace

TrainResultTabular train(const TabularPolicy& init, const PreferenceDataset& data,
                         const LossSpec& loss, const BasePolicy& base,
                         const TrainConfig& config) {
  const PolicyView view(init);
  check_inputs(view, data);
  check_config(config, data.size());
  check_reg(config.regularizer, init.num_contexts(), init.num_responses());

  const int X = init.num_contexts(), Y = init.num_responses();
  auto rebuild = [X, Y](const std::vector<double>& theta) {
    return log_probs_of(Matrix(X, Y, theta));
  };
  auto param_grad = [](const Matrix& grad_logits, const std::vector<double>&) {
    return grad_logits.data();
  };

  auto run_once = [&](const Regularizer& reg) {
    TrainCore core{data, loss, base.log_weight_table(X, Y), config,
                   empirical_d_x(data, X), {}};
    auto theta = core.run(init.logits().data(), reg, rebuild, param_grad);
    return std::pair(std::move(theta), std::move(core.trace));
  };

  if (config.regularizer.kind == RegKind::CeConstraint) {
    std::vector<double> theta_final = init.logits().data();
    auto trace = constrained_outer(
        config.regularizer,
        [&](const Regularizer& penalty) {
          auto [theta, trace] = run_once(penalty);
          theta_final = std::move(theta);
          return trace;
        },
        [&]() {
          TabularPolicy p(Matrix(X, Y, theta_final));
          return cross_entropy(*config.regularizer.anchor, PolicyView(p),
                               empirical_d_x(data, X));
        });
    return {TabularPolicy(Matrix(X, Y, std::move(theta_final))), std::move(trace)};
  }

  auto [theta, trace] = run_once(config.regularizer);
  return {TabularPolicy(Matrix(X, Y, std::move(theta))), std::move(trace)};
}

TrainResultLinear train(const LinearSoftmaxPolicy& init, const PreferenceDataset& data,
                        const LossSpec& loss, const BasePolicy& base, const TrainConfig& config) {
  const PolicyView view(init);
  check_inputs(view, data);
  check_config(config, data.size());
  check_reg(config.regularizer, init.num_contexts(), init.num_responses());

  const int X = init.num_contexts(), Y = init.num_responses();
  const FeatureTable& feats = init.features();
  auto rebuild = [&feats](const std::vector<double>& w) {
    return Matrix(LinearSoftmaxPolicy(w, feats).log_probs());
  };
  auto param_grad = [&feats, X, Y](const Matrix& grad_logits, const std::vector<double>& w) {
    std::vector<double> g(w.size(), 0.0);
    for (int x = 0; x < X; ++x)
      for (int y = 0; y < Y; ++y) {
        const double gl = grad_logits(x, y);
        if (gl == 0.0) continue;
        const auto f = feats.phi(x, y);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += gl * f[k];
      }
    return g;
  };

  auto run_once = [&](const Regularizer& reg) {
    TrainCore core{data, loss, base.log_weight_table(X, Y), config,
                   empirical_d_x(data, X), {}};
    auto w = core.run(init.weights(), reg, rebuild, param_grad);
    return std::pair(std::move(w), std::move(core.trace));
  };

  if (config.regularizer.kind == RegKind::CeConstraint) {
    std::vector<double> w_final = init.weights();
    auto trace = constrained_outer(
        config.regularizer,
        [&](const Regularizer& penalty) {
          auto [w, trace] = run_once(penalty);
          w_final = std::move(w);
          return trace;
        },
        [&]() {
          LinearSoftmaxPolicy p(w_final, feats);
          return cross_entropy(*config.regularizer.anchor, PolicyView(p),
                               empirical_d_x(data, X));
        });
    return {LinearSoftmaxPolicy(std::move(w_final), feats), std::move(trace)};
  }

  auto [w, trace] = run_once(config.regularizer);
  return {LinearSoftmaxPolicy(std::move(w), feats), std::move(trace)};
}

}  // namespace prefopt
