#include "prefopt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace prefopt {

void validate_sample(const PreferenceSample& s, int num_contexts, int num_responses) {
  if (s.x < 0 || s.x >= num_contexts) throw std::out_of_range("sample context out of range");
  if (s.y < 0 || s.y >= num_responses || s.y_prime < 0 || s.y_prime >= num_responses)
    throw std::out_of_range("sample response out of range");
  if (s.omega != 1 && s.omega != -1)
    throw std::invalid_argument("sample label must be +1 or -1");
}

void validate_sample(const PreferenceSample& s, const InstanceSpace& space) {
  validate_sample(s, space.num_contexts, space.num_responses());
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

Matrix log_probs_from_logits(const Matrix& logits) {
  Matrix logp(logits.rows(), logits.cols());
  for (int x = 0; x < logits.rows(); ++x) {
    const double lse = log_sum_exp(logits.row(x));
    for (int y = 0; y < logits.cols(); ++y) logp(x, y) = logits(x, y) - lse;
  }
  return logp;
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

}  // namespace

TabularPolicy::TabularPolicy(Matrix logits) : logits_(std::move(logits)) {
  if (logits_.rows() < 1 || logits_.cols() < 1)
    throw std::invalid_argument("TabularPolicy: empty space");
  check_finite(logits_, "TabularPolicy logits");
  logp_ = log_probs_from_logits(logits_);
}

TabularPolicy TabularPolicy::uniform(int num_contexts, int num_responses) {
  return TabularPolicy(Matrix(num_contexts, num_responses, 0.0));
}

double TabularPolicy::log_prob(int x, int y) const { return logp_.at(x, y); }

double TabularPolicy::prob(int x, int y) const { return std::exp(log_prob(x, y)); }

Matrix TabularPolicy::centered_logits() const {
  Matrix out = logits_;
  for (int x = 0; x < out.rows(); ++x) {
    double mean = 0.0;
    for (int y = 0; y < out.cols(); ++y) mean += out(x, y);
    mean /= out.cols();
    for (int y = 0; y < out.cols(); ++y) out(x, y) -= mean;
  }
  return out;
}

FeatureTable::FeatureTable(int num_contexts, int num_responses, int dim,
                           std::vector<double> values)
    : num_contexts_(num_contexts), num_responses_(num_responses), dim_(dim), v_(std::move(values)) {
  if (num_contexts_ < 1 || num_responses_ < 1 || dim_ < 1)
    throw std::invalid_argument("FeatureTable: empty shape");
  if (v_.size() != static_cast<std::size_t>(num_contexts_) * num_responses_ * dim_)
    throw std::invalid_argument("FeatureTable: value count does not match shape");
  for (double v : v_)
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureTable: non-finite entry");
}

LinearSoftmaxPolicy::LinearSoftmaxPolicy(std::vector<double> weights, FeatureTable features)
    : weights_(std::move(weights)), features_(std::move(features)) {
  if (static_cast<int>(weights_.size()) != features_.dim())
    throw std::invalid_argument("LinearSoftmaxPolicy: weight/feature dim mismatch");
  for (double w : weights_)
    if (!std::isfinite(w)) throw std::invalid_argument("LinearSoftmaxPolicy: non-finite weight");
  Matrix scores(features_.num_contexts(), features_.num_responses());
  for (int x = 0; x < scores.rows(); ++x) {
    for (int y = 0; y < scores.cols(); ++y) {
      const auto f = features_.phi(x, y);
      double s = 0.0;
      for (int k = 0; k < features_.dim(); ++k) s += weights_[k] * f[k];
      scores(x, y) = s;
    }
  }
  logp_ = log_probs_from_logits(scores);
}

double LinearSoftmaxPolicy::log_prob(int x, int y) const { return logp_.at(x, y); }

double LinearSoftmaxPolicy::prob(int x, int y) const { return std::exp(log_prob(x, y)); }

TabularPolicy LinearSoftmaxPolicy::as_tabular() const { return TabularPolicy(logp_); }

std::string to_string(BaseKind kind) {
  switch (kind) {
    case BaseKind::Uniform: return "uniform";
    case BaseKind::Reference: return "reference";
    case BaseKind::LengthPenalized: return "length_penalized";
    case BaseKind::ScoreWeighted: return "score_weighted";
  }
  return "unknown";
}

BasePolicy BasePolicy::uniform() {
  BasePolicy b;
  b.kind_ = BaseKind::Uniform;
  return b;
}

BasePolicy BasePolicy::reference(TabularPolicy ref) {
  BasePolicy b;
  b.kind_ = BaseKind::Reference;
  b.ref_ = std::make_shared<TabularPolicy>(std::move(ref));
  return b;
}

BasePolicy BasePolicy::length_penalized(TabularPolicy ref, double alpha, double beta,
                                        std::vector<int> response_lengths) {
  if (beta == 0.0) throw std::invalid_argument("length_penalized: beta must be nonzero");
  if (static_cast<int>(response_lengths.size()) != ref.num_responses())
    throw std::invalid_argument("length_penalized: lengths size mismatch");
  for (int len : response_lengths)
    if (len < 1) throw std::invalid_argument("length_penalized: lengths must be >= 1");
  BasePolicy b;
  b.kind_ = BaseKind::LengthPenalized;
  b.ref_ = std::make_shared<TabularPolicy>(std::move(ref));
  b.alpha_ = alpha;
  b.beta_ = beta;
  b.lengths_ = std::move(response_lengths);
  return b;
}

BasePolicy BasePolicy::score_weighted(TabularPolicy ref, Matrix scores) {
  if (scores.rows() != ref.num_contexts() || scores.cols() != ref.num_responses())
    throw std::invalid_argument("score_weighted: score table shape mismatch");
  for (double s : scores.data())
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("score_weighted: scores must be finite and > 0");
  BasePolicy b;
  b.kind_ = BaseKind::ScoreWeighted;
  b.ref_ = std::make_shared<TabularPolicy>(std::move(ref));
  b.scores_ = std::move(scores);
  return b;
}

const TabularPolicy& BasePolicy::reference_policy() const {
  if (!ref_) throw std::logic_error("base policy has no reference");
  return *ref_;
}

double BasePolicy::log_weight(int x, int y) const {
  switch (kind_) {
    case BaseKind::Uniform:
      return 0.0;
    case BaseKind::Reference:
      return ref_->log_prob(x, y);
    case BaseKind::LengthPenalized:
      return ref_->log_prob(x, y) + (alpha_ / beta_) * lengths_[static_cast<std::size_t>(y)];
    case BaseKind::ScoreWeighted:
      return ref_->log_prob(x, y) + std::log(scores_.at(x, y));
  }
  throw std::logic_error("unreachable");
}

Matrix BasePolicy::log_weight_table(int num_contexts, int num_responses) const {
  if (ref_ && (ref_->num_contexts() != num_contexts || ref_->num_responses() != num_responses))
    throw std::invalid_argument("base policy reference shape does not match requested space");
  if (kind_ == BaseKind::LengthPenalized &&
      static_cast<int>(lengths_.size()) != num_responses)
    throw std::invalid_argument("base policy lengths do not match requested space");
  Matrix out(num_contexts, num_responses);
  for (int x = 0; x < num_contexts; ++x)
    for (int y = 0; y < num_responses; ++y) out(x, y) = log_weight(x, y);
  return out;
}

double margin(const PolicyView& policy, const BasePolicy& base, int x, int y, int y_prime) {
  if (x < 0 || x >= policy.num_contexts()) throw std::out_of_range("margin: context");
  if (y < 0 || y >= policy.num_responses() || y_prime < 0 || y_prime >= policy.num_responses())
    throw std::out_of_range("margin: response");
  return (policy.log_prob(x, y) - base.log_weight(x, y)) -
         (policy.log_prob(x, y_prime) - base.log_weight(x, y_prime));
}

double centered_reward(const PolicyView& policy, std::span<const double> d_y_row, int x, int y) {
  if (static_cast<int>(d_y_row.size()) != policy.num_responses())
    throw std::invalid_argument("centered_reward: d_y row size mismatch");
  double total = 0.0, mean = 0.0;
  for (int b = 0; b < policy.num_responses(); ++b) {
    total += d_y_row[static_cast<std::size_t>(b)];
    mean += d_y_row[static_cast<std::size_t>(b)] * policy.log_prob(x, b);
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("centered_reward: d_y row does not sum to 1");
  return policy.log_prob(x, y) - mean;
}

std::vector<double> centered_rewards_row(const PolicyView& policy,
                                         std::span<const double> d_y_row, int x) {
  std::vector<double> out(static_cast<std::size_t>(policy.num_responses()));
  for (int y = 0; y < policy.num_responses(); ++y)
    out[static_cast<std::size_t>(y)] = centered_reward(policy, d_y_row, x, y);
  return out;
}

double centered_partition(const PolicyView& policy, std::span<const double> d_y_row, int x) {
  const auto rbar = centered_rewards_row(policy, d_y_row, x);
  double z = 0.0;
  for (double r : rbar) z += std::exp(r);
  return z;
}

MarginRange margin_range(const PolicyView& policy, const BasePolicy& base,
                         std::optional<double> configured_range) {
  MarginRange r;
  const int X = policy.num_contexts(), Y = policy.num_responses();
  const Matrix logmu = base.log_weight_table(X, Y);
  for (int x = 0; x < X; ++x) {
    // max margin in a context is the spread of log pi - log mu
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = 0; y < Y; ++y) {
      const double v = policy.log_prob(x, y) - logmu(x, y);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    r.max_abs_margin = std::max(r.max_abs_margin, hi - lo);
  }
  if (configured_range && r.max_abs_margin > *configured_range) r.exceeds_configured = true;
  return r;
}

}  // namespace prefopt
