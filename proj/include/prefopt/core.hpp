#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefopt/matrix.hpp"

namespace prefopt {

// ---------------------------------------------------------------------------
// Spaces and data
// ---------------------------------------------------------------------------

// Finite context set X = {0..num_contexts-1} and response set Y shared across
// contexts. Response lengths exist only for the length-penalized base policy.
struct InstanceSpace {
  int num_contexts = 0;
  std::vector<int> response_lengths;  // size |Y|, each >= 1

  int num_responses() const { return static_cast<int>(response_lengths.size()); }
  static InstanceSpace unit_lengths(int num_contexts, int num_responses) {
    return {num_contexts, std::vector<int>(static_cast<std::size_t>(num_responses), 1)};
  }
};

struct PreferenceSample {
  int x = 0;
  int y = 0;
  int y_prime = 0;
  int omega = 1;  // +1: y preferred over y_prime, -1: the reverse
};

struct PreferenceDataset {
  std::vector<PreferenceSample> samples;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Assumption-1 constants: margins live in [-range_R, range_R] and the loss is
// bounded by loss_bound_B there. Violations are measured and reported, never
// clamped.
struct BoundConstants {
  double range_R = 0.0;
  double loss_bound_B = 0.0;
};

void validate_sample(const PreferenceSample& s, int num_contexts, int num_responses);
void validate_sample(const PreferenceSample& s, const InstanceSpace& space);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

// Softmax policy over a finite space, parameterized directly by a logits
// matrix (|X| x |Y|). Log-probabilities are precomputed via max-shifted
// log-sum-exp; instances are immutable after construction and safe to share
// across threads.
class TabularPolicy {
 public:
  explicit TabularPolicy(Matrix logits);
  static TabularPolicy uniform(int num_contexts, int num_responses);

  int num_contexts() const { return logits_.rows(); }
  int num_responses() const { return logits_.cols(); }

  double log_prob(int x, int y) const;  // throws std::out_of_range on bad index
  double prob(int x, int y) const;

  const Matrix& logits() const { return logits_; }
  const Matrix& log_probs() const { return logp_; }

  // Logits with each row shifted to zero mean; the canonical representative of
  // the shift-invariance class, used for parameter distances.
  Matrix centered_logits() const;

 private:
  Matrix logits_;
  Matrix logp_;
};

// Feature map phi(x, y) in R^d, stored as a (|X|*|Y|) x d table.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(int num_contexts, int num_responses, int dim, std::vector<double> values);

  int num_contexts() const { return num_contexts_; }
  int num_responses() const { return num_responses_; }
  int dim() const { return dim_; }

  std::span<const double> phi(int x, int y) const {
    return {v_.data() + (static_cast<std::size_t>(x) * num_responses_ + y) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& values() const { return v_; }

 private:
  int num_contexts_ = 0, num_responses_ = 0, dim_ = 0;
  std::vector<double> v_;
};

// Softmax policy with linear scores w . phi(x, y).
class LinearSoftmaxPolicy {
 public:
  LinearSoftmaxPolicy(std::vector<double> weights, FeatureTable features);

  int num_contexts() const { return features_.num_contexts(); }
  int num_responses() const { return features_.num_responses(); }
  int dim() const { return features_.dim(); }

  double log_prob(int x, int y) const;
  double prob(int x, int y) const;

  const std::vector<double>& weights() const { return weights_; }
  const FeatureTable& features() const { return features_; }
  const Matrix& log_probs() const { return logp_; }

  // The induced tabular view (logits = scores); margins and KLs agree exactly.
  TabularPolicy as_tabular() const;

 private:
  std::vector<double> weights_;
  FeatureTable features_;
  Matrix logp_;
};

// Read-only view on any softmax policy: a log-probability table plus identity.
// All downstream quantities (margins, centered rewards, KL) depend on the
// policy only through this table.
class PolicyView {
 public:
  PolicyView(const TabularPolicy& p) : logp_(&p.log_probs()) {}          // NOLINT
  PolicyView(const LinearSoftmaxPolicy& p) : logp_(&p.log_probs()) {}    // NOLINT
  explicit PolicyView(const Matrix& log_probs) : logp_(&log_probs) {}

  int num_contexts() const { return logp_->rows(); }
  int num_responses() const { return logp_->cols(); }
  double log_prob(int x, int y) const { return logp_->at(x, y); }
  const Matrix& log_probs() const { return *logp_; }

 private:
  const Matrix* logp_;
};

// ---------------------------------------------------------------------------
// Base policies
// ---------------------------------------------------------------------------

enum class BaseKind { Uniform, Reference, LengthPenalized, ScoreWeighted };

std::string to_string(BaseKind kind);

// Unnormalized positive weighting mu(y|x). Only log-weight differences within
// a context are ever consumed, so no normalization is performed or assumed.
// Default-constructed: the uniform base.
class BasePolicy {
 public:
  BasePolicy() = default;
  static BasePolicy uniform();
  static BasePolicy reference(TabularPolicy ref);
  // mu(y|x) = pi_ref(y|x) * exp((alpha/beta) * |y|)
  static BasePolicy length_penalized(TabularPolicy ref, double alpha, double beta,
                                     std::vector<int> response_lengths);
  // mu(y|x) = pi_ref(y|x) * score(x, y), scores strictly positive
  static BasePolicy score_weighted(TabularPolicy ref, Matrix scores);

  BaseKind kind() const { return kind_; }
  bool has_reference() const { return ref_ != nullptr; }
  const TabularPolicy& reference_policy() const;

  // log mu(y|x); finite for every in-range (x, y).
  double log_weight(int x, int y) const;

  // Materialized log mu table for a given space (validated against the
  // reference dims when one is present).
  Matrix log_weight_table(int num_contexts, int num_responses) const;

 private:
  BaseKind kind_ = BaseKind::Uniform;
  std::shared_ptr<const TabularPolicy> ref_;
  double alpha_ = 0.0, beta_ = 1.0;
  std::vector<int> lengths_;
  Matrix scores_;
};

// ---------------------------------------------------------------------------
// Reward-view algebra
// ---------------------------------------------------------------------------

// Margin: log(pi(y|x)/mu(y|x)) - log(pi(y'|x)/mu(y'|x)); antisymmetric in
// (y, y') and invariant to per-context rescaling of mu.
double margin(const PolicyView& policy, const BasePolicy& base, int x, int y, int y_prime);

// Same, from precomputed tables (hot-path form used by the kernels).
inline double margin_from_tables(const Matrix& logp, const Matrix& logmu, int x, int y,
                                 int y_prime) {
  return (logp(x, y) - logmu(x, y)) - (logp(x, y_prime) - logmu(x, y_prime));
}

// y-centered reward: R(x,y) - E_{y ~ d_y(.|x)}[R(x,y)]. d_y_row must be a
// probability vector over Y.
double centered_reward(const PolicyView& policy, std::span<const double> d_y_row, int x, int y);

// Full centered table for one context.
std::vector<double> centered_rewards_row(const PolicyView& policy, std::span<const double> d_y_row,
                                         int x);

// Z-bar(x) = sum_y exp(Rbar(x,y)).
double centered_partition(const PolicyView& policy, std::span<const double> d_y_row, int x);

struct MarginRange {
  double max_abs_margin = 0.0;
  bool exceeds_configured = false;
};

// Max |margin| over every (x, y, y') in the full finite support; flags a
// violation when a configured range is provided.
MarginRange margin_range(const PolicyView& policy, const BasePolicy& base,
                         std::optional<double> configured_range = std::nullopt);

// Numerically stable log(sum_i exp(v_i)).
double log_sum_exp(std::span<const double> v);

}  // namespace prefopt
