#include "prefopt/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_prob_vector(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

}  // namespace

std::string to_string(PrefKind k) {
  switch (k) {
    case PrefKind::Btl: return "btl";
    case PrefKind::Linear: return "linear";
    case PrefKind::Custom: return "custom";
  }
  return "unknown";
}

EtaTable::EtaTable(int num_contexts, int num_responses, std::vector<double> values)
    : nx_(num_contexts), ny_(num_responses), v_(std::move(values)) {
  if (v_.size() != static_cast<std::size_t>(nx_) * ny_ * ny_)
    throw std::invalid_argument("EtaTable: value count does not match shape");
  for (int x = 0; x < nx_; ++x) {
    for (int y = 0; y < ny_; ++y) {
      for (int yp = 0; yp < ny_; ++yp) {
        const double e = eta(x, y, yp);
        if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("EtaTable: eta outside [0,1]");
        if (std::abs(e + eta(x, yp, y) - 1.0) > 1e-9)
          throw std::invalid_argument("EtaTable: eta(y,y') + eta(y',y) != 1");
      }
    }
  }
}

void GenerativeModel::validate_distributions() const {
  if (static_cast<int>(d_x_.size()) != d_y_.rows())
    throw std::invalid_argument("GenerativeModel: |d_x| != rows of d_y");
  check_prob_vector(d_x_, "d_x");
  for (int x = 0; x < d_y_.rows(); ++x) check_prob_vector(d_y_.row(x), "d_y row");
}

GenerativeModel GenerativeModel::btl(std::vector<double> d_x, Matrix d_y, GroundTruth gt) {
  if (!gt.r_star.same_shape(d_y)) throw std::invalid_argument("btl: r_star shape mismatch");
  for (double v : gt.r_star.data())
    if (!std::isfinite(v)) throw std::invalid_argument("btl: non-finite reward");
  GenerativeModel m;
  m.kind_ = PrefKind::Btl;
  m.d_x_ = std::move(d_x);
  m.d_y_ = std::move(d_y);
  m.gt_ = std::move(gt);
  m.validate_distributions();
  return m;
}

GenerativeModel GenerativeModel::linear(std::vector<double> d_x, Matrix d_y, GroundTruth gt) {
  if (!gt.r_star.same_shape(d_y)) throw std::invalid_argument("linear: r_star shape mismatch");
  double max_gap = 0.0;
  for (int x = 0; x < gt.r_star.rows(); ++x) {
    double lo = gt.r_star(x, 0), hi = gt.r_star(x, 0);
    for (int y = 0; y < gt.r_star.cols(); ++y) {
      lo = std::min(lo, gt.r_star(x, y));
      hi = std::max(hi, gt.r_star(x, y));
    }
    max_gap = std::max(max_gap, hi - lo);
  }
  GenerativeModel m;
  m.kind_ = PrefKind::Linear;
  // 0.5 + gap/2 lands in [0, 1] only for |gap| <= 1; rescale and record.
  if (max_gap > 1.0) {
    m.linear_scale_ = 1.0 / max_gap;
    for (double& v : gt.r_star.data()) v *= m.linear_scale_;
  }
  m.d_x_ = std::move(d_x);
  m.d_y_ = std::move(d_y);
  m.gt_ = std::move(gt);
  m.validate_distributions();
  return m;
}

GenerativeModel GenerativeModel::custom(std::vector<double> d_x, Matrix d_y, EtaTable eta) {
  if (eta.num_contexts() != d_y.rows() || eta.num_responses() != d_y.cols())
    throw std::invalid_argument("custom: eta table shape mismatch");
  GenerativeModel m;
  m.kind_ = PrefKind::Custom;
  m.d_x_ = std::move(d_x);
  m.d_y_ = std::move(d_y);
  m.eta_ = std::move(eta);
  m.validate_distributions();
  return m;
}

const GroundTruth& GenerativeModel::ground_truth() const {
  if (!gt_) throw std::logic_error("model has no ground-truth reward");
  return *gt_;
}

const EtaTable& GenerativeModel::eta_table() const {
  if (!eta_) throw std::logic_error("model has no eta table");
  return *eta_;
}

double GenerativeModel::preference_prob(int x, int y, int y_prime) const {
  if (x < 0 || x >= num_contexts()) throw std::out_of_range("preference_prob: context");
  if (y < 0 || y >= num_responses() || y_prime < 0 || y_prime >= num_responses())
    throw std::out_of_range("preference_prob: response");
  switch (kind_) {
    case PrefKind::Btl:
      return sigmoid(gt_->r_star(x, y) - gt_->r_star(x, y_prime));
    case PrefKind::Linear: {
      const double gap = gt_->r_star(x, y) - gt_->r_star(x, y_prime);
      return 0.5 + 0.5 * gap;
    }
    case PrefKind::Custom:
      return eta_->eta(x, y, y_prime);
  }
  throw std::logic_error("unreachable");
}

PreferenceDataset sample_dataset(const GenerativeModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Rng rng(seed);
  PreferenceDataset ds;
  ds.seed = seed;
  ds.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int x = rng.categorical(model.d_x());
    const int y = rng.categorical(model.d_y().row(x));
    const int y_prime = rng.categorical(model.d_y().row(x));
    const double eta = model.preference_prob(x, y, y_prime);
    const int omega = rng.u01() < eta ? 1 : -1;
    ds.samples.push_back({x, y, y_prime, omega});
  }
  return ds;
}

BenchmarkPolicy benchmark_policy(const GenerativeModel& model, const LossSpec& loss,
                                 const BasePolicy& base, std::optional<BoundConstants> bounds) {
  if (!loss.proper())
    throw std::invalid_argument("benchmark_policy: loss '" + loss.name + "' has no link");
  const int X = model.num_contexts(), Y = model.num_responses();
  const Matrix logmu = base.log_weight_table(X, Y);
  const auto& link = *loss.link;

  // Pointwise Assumption-2 targets m*(x,y,y') = link(eta). A consistent score
  // s(x,y) with s(y) - s(y') = m* is recovered from row means; residuals are
  // verified below.
  Matrix scores(X, Y);
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      double mean = 0.0;
      for (int yp = 0; yp < Y; ++yp) mean += link(model.preference_prob(x, y, yp));
      scores(x, y) = mean / Y;
    }
  }

  Matrix logits(X, Y);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) logits(x, y) = scores(x, y) + logmu(x, y);

  BenchmarkPolicy out{TabularPolicy(std::move(logits)), loss.name, base.kind(), false, 0.0};
  const bool logistic_family = loss.name == "logistic" || loss.name.rfind("gpo:logistic", 0) == 0;
  const bool squared_family = loss.name == "squared" || loss.name == "ipo";
  out.matched = (logistic_family && model.pref_kind() == PrefKind::Btl) ||
                (squared_family && model.pref_kind() == PrefKind::Linear);

  const PolicyView view(out.pi_star);
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      for (int yp = 0; yp < Y; ++yp) {
        if (model.d_y()(x, y) <= 0.0 || model.d_y()(x, yp) <= 0.0) continue;
        const double target = link(model.preference_prob(x, y, yp));
        if (bounds && std::abs(target) > bounds->range_R + 1e-12)
          throw std::domain_error("benchmark_policy: target margin exceeds configured range");
        const double got = margin(view, base, x, y, yp);
        out.max_link_residual = std::max(out.max_link_residual, std::abs(got - target));
      }
    }
  }
  return out;
}

RealizabilityReport check_realizability(const PolicyClassSpec& spec,
                                        const TabularPolicy& pi_star) {
  RealizabilityReport r;
  switch (spec.kind) {
    case PolicyClassKind::Unconstrained:
      r.realizable = true;
      r.measured = 0.0;
      r.slack = std::numeric_limits<double>::infinity();
      return r;
    case PolicyClassKind::L2Ball: {
      if (!spec.anchor) throw std::invalid_argument("check_realizability: L2Ball needs anchor");
      const Matrix a = spec.anchor->centered_logits();
      const Matrix b = pi_star.centered_logits();
      if (!a.same_shape(b)) throw std::invalid_argument("check_realizability: shape mismatch");
      double sq = 0.0;
      for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sq += d * d;
      }
      r.measured = std::sqrt(sq);
      r.slack = spec.radius - r.measured;
      r.realizable = r.slack >= -1e-12;
      return r;
    }
    case PolicyClassKind::CeBall: {
      if (!spec.anchor) throw std::invalid_argument("check_realizability: CeBall needs anchor");
      if (static_cast<int>(spec.d_x.size()) != pi_star.num_contexts())
        throw std::invalid_argument("check_realizability: d_x size mismatch");
      // CE(anchor, pi*) = -E_{x ~ d_x, y ~ anchor} log pi*(y|x)
      double ce = 0.0;
      for (int x = 0; x < pi_star.num_contexts(); ++x)
        for (int y = 0; y < pi_star.num_responses(); ++y) {
          const double w = spec.d_x[static_cast<std::size_t>(x)] * spec.anchor->prob(x, y);
          if (w > 0.0) ce -= w * pi_star.log_prob(x, y);
        }
      r.measured = ce;
      r.slack = spec.lambda - ce;
      r.realizable = r.slack >= -1e-12;
      return r;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace prefopt
