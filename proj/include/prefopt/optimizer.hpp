#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "prefopt/core.hpp"
#include "prefopt/datagen.hpp"
#include "prefopt/loss_zoo.hpp"

namespace prefopt {

enum class RegKind { None, CePenalty, CeConstraint, L2Ball, KlPenalty };

std::string to_string(RegKind kind);

// Constraint/regularizer mechanisms from the method catalog. CE and KL terms
// are evaluated under the empirical context distribution of the training set.
// L2Ball is enforced by projection after every step and contributes nothing to
// the objective value; CeConstraint is enforced by penalty-multiplier doubling
// across restarts until CE(anchor, pi) <= lambda at termination.
struct Regularizer {
  RegKind kind = RegKind::None;
  std::shared_ptr<const TabularPolicy> anchor;        // CE/KL anchor pi_0
  double alpha = 0.0;                                 // CE penalty coefficient
  double lambda = 0.0;                                // CE constraint level
  double coeff = 0.0;                                 // KL penalty coefficient
  double radius = 0.0;                                // L2 ball radius
  std::optional<std::vector<double>> l2_anchor;       // theta_0; default: init params

  static Regularizer none() { return {}; }
  static Regularizer ce_penalty(std::shared_ptr<const TabularPolicy> anchor, double alpha);
  static Regularizer ce_constraint(std::shared_ptr<const TabularPolicy> anchor, double lambda);
  static Regularizer kl_penalty(std::shared_ptr<const TabularPolicy> anchor, double coeff);
  static Regularizer l2_ball(double radius,
                             std::optional<std::vector<double>> anchor_params = std::nullopt);
};

struct Schedule {
  enum class Kind { Constant, LinearWarmup } kind = Kind::Constant;
  int warmup_steps = 0;

  double factor(int step) const {
    if (kind == Kind::Constant || warmup_steps <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(step + 1) / warmup_steps);
  }
};

struct TrainConfig {
  int steps = 0;
  int batch_size = 0;  // == dataset size selects exact full-batch descent
  double learning_rate = 0.0;
  Schedule schedule;
  std::uint64_t seed = 0;
  Regularizer regularizer;
  int trace_every = 1;
};

struct TraceRow {
  int step = 0;  // number of completed steps
  double loss = 0.0;
  double logp_preferred = 0.0;
  double logp_dispreferred = 0.0;
  double mean_abs_margin = 0.0;
  double max_abs_margin = 0.0;
  double curvature_at_margin = 0.0;  // loss curvature at mean |margin|
  double param_dist = 0.0;           // ||theta - theta_0||_2
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  bool diverged = false;
  bool constraint_satisfied = true;
  int ce_doublings = 0;
  double final_penalty_alpha = 0.0;
};

struct TrainResultTabular {
  TabularPolicy policy;
  TrainTrace trace;
};

struct TrainResultLinear {
  LinearSoftmaxPolicy policy;
  TrainTrace trace;
};

// Mean empirical loss (1/n) sum_i l(omega_i * margin_i) plus any CE/KL penalty
// term. OpenMP-parallel over samples with a deterministic reduction.
double objective(const PolicyView& policy, const PreferenceDataset& data, const LossSpec& loss,
                 const BasePolicy& base, const Regularizer& reg = {});

// Gradient of objective() w.r.t. logits / weights; matches central finite
// differences to 1e-6 relative error.
Matrix gradient(const TabularPolicy& policy, const PreferenceDataset& data, const LossSpec& loss,
                const BasePolicy& base, const Regularizer& reg = {});
std::vector<double> gradient(const LinearSoftmaxPolicy& policy, const PreferenceDataset& data,
                             const LossSpec& loss, const BasePolicy& base,
                             const Regularizer& reg = {});

// Gradient of the exact population loss w.r.t. tabular logits (enumeration).
Matrix population_gradient(const TabularPolicy& policy, const GenerativeModel& model,
                           const LossSpec& loss, const BasePolicy& base);

// Mini-batch gradient descent per the config. On divergence (non-finite
// objective or parameters) training stops and the trace is returned with
// diverged = true and the last finite parameters.
TrainResultTabular train(const TabularPolicy& init, const PreferenceDataset& data,
                         const LossSpec& loss, const BasePolicy& base, const TrainConfig& config);
TrainResultLinear train(const LinearSoftmaxPolicy& init, const PreferenceDataset& data,
                        const LossSpec& loss, const BasePolicy& base, const TrainConfig& config);

// CE(pi_0, pi) = -E_{x ~ d_x, y ~ pi_0(.|x)} log pi(y|x), exact enumeration.
double cross_entropy(const TabularPolicy& anchor, const PolicyView& policy,
                     std::span<const double> d_x);
// Same with an explicit row-stochastic y-weight table in place of the anchor.
double cross_entropy(const Matrix& y_weights, const PolicyView& policy,
                     std::span<const double> d_x);

// Empirical context distribution of a dataset (used by the penalty terms).
std::vector<double> empirical_d_x(const PreferenceDataset& data, int num_contexts);

}  // namespace prefopt
