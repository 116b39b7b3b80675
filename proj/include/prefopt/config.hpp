#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace prefopt {

// Versioned, strictly validated experiment document. Unknown keys are
// rejected; every random choice carries its own seed so data files are
// byte-identical across reruns.

struct InstanceConfig {
  int num_contexts = 1;
  int num_responses = 2;
  std::vector<int> response_lengths;  // default: all 1

  std::string r_star_kind = "random";  // random | explicit | zero
  std::vector<double> r_star_values;   // row-major, explicit
  std::uint64_t r_star_seed = 0;
  double r_star_scale = 1.0;

  std::string d_x_kind = "uniform";  // uniform | explicit
  std::vector<double> d_x_values;

  std::string d_y_kind = "uniform";  // uniform | explicit | restricted_uniform
  std::vector<double> d_y_values;    // row-major, explicit
  std::vector<std::vector<int>> d_y_exclude;  // per-context exclusions

  std::string preference = "btl";  // btl | linear | custom
  std::vector<double> eta_values;  // |X|*|Y|*|Y|, custom

  int feature_dim = 0;                 // 0 = no feature table
  std::string features_kind = "none";  // none | random | explicit
  std::uint64_t features_seed = 0;
  double features_scale = 1.0;
  std::vector<double> features_values;
};

struct DataConfig {
  int n = 0;
  std::uint64_t seed = 0;
};

struct MethodConfig {
  std::string preset;  // empty = explicit loss/base/regularizer below

  std::string loss_kind = "logistic";  // logistic|squared|ipo|hinge|shifted_logistic
  double beta = 1.0;
  double tau = 0.0;
  double gamma = 0.0;

  std::string base_kind = "uniform";  // uniform|reference|length_penalized|score_weighted
  double base_alpha = 0.0;            // length penalty alpha
  std::vector<double> base_scores;    // score_weighted table, row-major

  std::string reference_kind = "uniform";  // uniform | random | explicit
  std::uint64_t reference_seed = 0;
  double reference_scale = 1.0;
  std::vector<double> reference_logits;  // row-major, explicit

  std::string reg_kind = "none";  // none|ce_penalty|ce_constraint|l2_ball|kl_penalty
  std::string reg_anchor = "reference";  // reference | uniform | preferred
  double reg_alpha = 0.0;
  double reg_lambda = 0.0;
  double reg_coeff = 0.0;
  double reg_radius = 0.0;
};

struct TrainSection {
  int steps = 0;
  int batch_size = 0;  // 0 resolves to the dataset size (full batch)
  double learning_rate = 0.1;
  std::string schedule = "constant";  // constant | linear_warmup
  int warmup_steps = 0;
  std::uint64_t seed = 0;
  int trace_every = 1;
  std::string init = "reference";  // reference | uniform | linear_zero
};

struct DiagnosticsSection {
  std::vector<std::string> coverage_variants = {"density_ratio"};
  std::uint64_t max_triples = 50'000'000;
  double grid_lo = -8.0;
  double grid_hi = 8.0;
  int grid_points = 1001;
  int grid_refinements = 2;
};

struct OutputSection {
  std::string directory = "out";
  std::vector<std::string> formats = {"json", "csv"};
};

struct SweepSection {
  std::vector<double> beta;
  std::vector<std::string> loss;
  std::vector<std::string> base;
  std::vector<std::uint64_t> seed;
  int workers = 0;  // 0 = library default
};

struct ExperimentConfig {
  int version = 1;
  InstanceConfig instance;
  DataConfig data;
  MethodConfig method;
  TrainSection train;
  DiagnosticsSection diagnostics;
  OutputSection output;
  std::optional<SweepSection> sweep;
};

// Strict parse; throws schema_error with a field-level message.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical resolved form of the whole config.
nlohmann::json resolved_json(const ExperimentConfig& config);

// Resolved form with the output location blanked: what gets embedded as
// provenance in every output file, so identical experiments produce
// byte-identical payloads regardless of where they are written.
nlohmann::json provenance_json(const ExperimentConfig& config);

}  // namespace prefopt
