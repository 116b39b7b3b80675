#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefopt/core.hpp"
#include "prefopt/loss_zoo.hpp"

namespace prefopt {

// Ground-truth reward R*(x, y) driving the preference model.
struct GroundTruth {
  Matrix r_star;
};

enum class PrefKind { Btl, Linear, Custom };

std::string to_string(PrefKind k);

// Symmetric eta table for the Custom preference model: eta(x, y, y') with
// eta + swapped = 1 and eta(x, y, y) = 1/2.
class EtaTable {
 public:
  EtaTable() = default;
  EtaTable(int num_contexts, int num_responses, std::vector<double> values);

  double eta(int x, int y, int y_prime) const {
    return v_[(static_cast<std::size_t>(x) * ny_ + y) * ny_ + y_prime];
  }
  int num_contexts() const { return nx_; }
  int num_responses() const { return ny_; }
  const std::vector<double>& values() const { return v_; }

 private:
  int nx_ = 0, ny_ = 0;
  std::vector<double> v_;
};

// The data generating process: D_x over contexts, D_y(.|x) rows (two i.i.d.
// response draws per sample), and the conditional label model D_omega.
class GenerativeModel {
 public:
  static GenerativeModel btl(std::vector<double> d_x, Matrix d_y, GroundTruth gt);
  // Rewards are rescaled at construction if the max in-context gap exceeds 2,
  // so the linear probabilities stay in [0, 1]; the factor is recorded.
  static GenerativeModel linear(std::vector<double> d_x, Matrix d_y, GroundTruth gt);
  static GenerativeModel custom(std::vector<double> d_x, Matrix d_y, EtaTable eta);

  int num_contexts() const { return d_y_.rows(); }
  int num_responses() const { return d_y_.cols(); }
  PrefKind pref_kind() const { return kind_; }
  const std::vector<double>& d_x() const { return d_x_; }
  const Matrix& d_y() const { return d_y_; }
  const GroundTruth& ground_truth() const;
  const EtaTable& eta_table() const;
  double linear_scale() const { return linear_scale_; }

  // eta(x, y, y') = P(omega = +1 | x, y, y').
  double preference_prob(int x, int y, int y_prime) const;

 private:
  GenerativeModel() = default;
  void validate_distributions() const;

  PrefKind kind_ = PrefKind::Btl;
  std::vector<double> d_x_;
  Matrix d_y_;
  std::optional<GroundTruth> gt_;
  std::optional<EtaTable> eta_;
  double linear_scale_ = 1.0;
};

// n i.i.d. samples from the generative process; byte-identical under a fixed
// seed.
PreferenceDataset sample_dataset(const GenerativeModel& model, int n, std::uint64_t seed);

struct BenchmarkPolicy {
  TabularPolicy pi_star;
  std::string loss_name;
  BaseKind base_kind = BaseKind::Uniform;
  bool matched = false;             // (logistic, BTL) or (squared/ipo, Linear)
  double max_link_residual = 0.0;   // max |margin(pi*) - link(eta)| on the support
};

// The Assumption-2 benchmark policy: margins equal link(eta) pointwise. For
// matched loss/model pairs this is exp(R*/beta) * mu, normalized per context.
// Throws std::invalid_argument for losses without a link, and std::domain_error
// when a target margin falls outside a configured range.
BenchmarkPolicy benchmark_policy(const GenerativeModel& model, const LossSpec& loss,
                                 const BasePolicy& base,
                                 std::optional<BoundConstants> bounds = std::nullopt);

enum class PolicyClassKind { Unconstrained, L2Ball, CeBall };

struct PolicyClassSpec {
  PolicyClassKind kind = PolicyClassKind::Unconstrained;
  std::optional<TabularPolicy> anchor;  // ball center / CE anchor
  double radius = 0.0;                  // L2 radius on centered logits
  double lambda = 0.0;                  // CE level
  std::vector<double> d_x;              // context weights for the CE expectation
};

struct RealizabilityReport {
  bool realizable = true;
  double measured = 0.0;  // distance or CE value
  double slack = 0.0;     // limit - measured (negative when violated)
};

RealizabilityReport check_realizability(const PolicyClassSpec& spec, const TabularPolicy& pi_star);

}  // namespace prefopt
