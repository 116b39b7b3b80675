#include "prefopt/config.hpp"

#include <set>

#include "prefopt/errors.hpp"
#include "prefopt/json_io.hpp"

namespace prefopt {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw schema_error("config." + key + ": " + e.what());
  }
}

void check_one_of(const std::string& value, const std::set<std::string>& allowed,
                  const std::string& field) {
  if (!allowed.count(value))
    throw schema_error("config." + field + ": unsupported value '" + value + "'");
}

InstanceConfig parse_instance(const json& j) {
  require_keys(j,
               {"num_contexts", "num_responses", "response_lengths", "r_star", "d_x", "d_y",
                "preference", "eta", "features"},
               "config.instance");
  InstanceConfig c;
  c.num_contexts = get_or(j, "num_contexts", c.num_contexts);
  c.num_responses = get_or(j, "num_responses", c.num_responses);
  if (c.num_contexts < 1 || c.num_responses < 2)
    throw schema_error("config.instance: need num_contexts >= 1 and num_responses >= 2");
  c.response_lengths = get_or(j, "response_lengths", std::vector<int>{});
  if (!c.response_lengths.empty() &&
      static_cast<int>(c.response_lengths.size()) != c.num_responses)
    throw schema_error("config.instance.response_lengths: size mismatch");

  if (j.contains("r_star")) {
    const auto& r = j.at("r_star");
    require_keys(r, {"kind", "values", "seed", "scale"}, "config.instance.r_star");
    c.r_star_kind = get_or(r, "kind", c.r_star_kind);
    check_one_of(c.r_star_kind, {"random", "explicit", "zero"}, "instance.r_star.kind");
    c.r_star_values = get_or(r, "values", std::vector<double>{});
    c.r_star_seed = get_or(r, "seed", std::uint64_t{0});
    c.r_star_scale = get_or(r, "scale", 1.0);
    if (c.r_star_kind == "explicit" &&
        static_cast<int>(c.r_star_values.size()) != c.num_contexts * c.num_responses)
      throw schema_error("config.instance.r_star.values: size mismatch");
  }

  if (j.contains("d_x")) {
    const auto& d = j.at("d_x");
    require_keys(d, {"kind", "values"}, "config.instance.d_x");
    c.d_x_kind = get_or(d, "kind", c.d_x_kind);
    check_one_of(c.d_x_kind, {"uniform", "explicit"}, "instance.d_x.kind");
    c.d_x_values = get_or(d, "values", std::vector<double>{});
    if (c.d_x_kind == "explicit" && static_cast<int>(c.d_x_values.size()) != c.num_contexts)
      throw schema_error("config.instance.d_x.values: size mismatch");
  }

  if (j.contains("d_y")) {
    const auto& d = j.at("d_y");
    require_keys(d, {"kind", "values", "exclude"}, "config.instance.d_y");
    c.d_y_kind = get_or(d, "kind", c.d_y_kind);
    check_one_of(c.d_y_kind, {"uniform", "explicit", "restricted_uniform"}, "instance.d_y.kind");
    c.d_y_values = get_or(d, "values", std::vector<double>{});
    if (c.d_y_kind == "explicit" &&
        static_cast<int>(c.d_y_values.size()) != c.num_contexts * c.num_responses)
      throw schema_error("config.instance.d_y.values: size mismatch");
    c.d_y_exclude = get_or(d, "exclude", std::vector<std::vector<int>>{});
    if (c.d_y_kind == "restricted_uniform") {
      if (static_cast<int>(c.d_y_exclude.size()) != c.num_contexts)
        throw schema_error("config.instance.d_y.exclude: need one list per context");
      for (const auto& row : c.d_y_exclude) {
        if (static_cast<int>(row.size()) >= c.num_responses)
          throw schema_error("config.instance.d_y.exclude: would empty the support");
        for (int y : row)
          if (y < 0 || y >= c.num_responses)
            throw schema_error("config.instance.d_y.exclude: response out of range");
      }
    }
  }

  c.preference = get_or(j, "preference", c.preference);
  check_one_of(c.preference, {"btl", "linear", "custom"}, "instance.preference");
  c.eta_values = get_or(j, "eta", std::vector<double>{});
  if (c.preference == "custom" &&
      static_cast<int>(c.eta_values.size()) !=
          c.num_contexts * c.num_responses * c.num_responses)
    throw schema_error("config.instance.eta: size mismatch for custom preference");

  if (j.contains("features")) {
    const auto& f = j.at("features");
    require_keys(f, {"kind", "dim", "seed", "scale", "values"}, "config.instance.features");
    c.features_kind = get_or(f, "kind", std::string("random"));
    check_one_of(c.features_kind, {"none", "random", "explicit"}, "instance.features.kind");
    c.feature_dim = get_or(f, "dim", 0);
    c.features_seed = get_or(f, "seed", std::uint64_t{0});
    c.features_scale = get_or(f, "scale", 1.0);
    c.features_values = get_or(f, "values", std::vector<double>{});
    if (c.features_kind != "none" && c.feature_dim < 1)
      throw schema_error("config.instance.features.dim: must be >= 1");
    if (c.features_kind == "explicit" &&
        static_cast<int>(c.features_values.size()) !=
            c.num_contexts * c.num_responses * c.feature_dim)
      throw schema_error("config.instance.features.values: size mismatch");
  }
  return c;
}

DataConfig parse_data(const json& j) {
  require_keys(j, {"n", "seed"}, "config.data");
  DataConfig c;
  c.n = get_or(j, "n", 0);
  if (c.n < 1) throw schema_error("config.data.n: must be >= 1");
  c.seed = get_or(j, "seed", std::uint64_t{0});
  return c;
}

MethodConfig parse_method(const json& j) {
  require_keys(j, {"preset", "loss", "beta", "tau", "gamma", "base", "reference", "regularizer"},
               "config.method");
  MethodConfig c;
  c.preset = get_or(j, "preset", std::string{});
  c.beta = get_or(j, "beta", 1.0);
  c.tau = get_or(j, "tau", 0.0);
  c.gamma = get_or(j, "gamma", 0.0);
  if (!(c.beta > 0.0)) throw schema_error("config.method.beta: must be > 0");

  if (j.contains("loss")) {
    if (!c.preset.empty())
      throw schema_error("config.method: give either preset or loss, not both");
    c.loss_kind = j.at("loss").get<std::string>();
    check_one_of(c.loss_kind, {"logistic", "squared", "ipo", "hinge", "shifted_logistic"},
                 "method.loss");
  }

  if (j.contains("base")) {
    const auto& b = j.at("base");
    require_keys(b, {"kind", "alpha", "scores"}, "config.method.base");
    c.base_kind = get_or(b, "kind", c.base_kind);
    check_one_of(c.base_kind, {"uniform", "reference", "length_penalized", "score_weighted"},
                 "method.base.kind");
    c.base_alpha = get_or(b, "alpha", 0.0);
    c.base_scores = get_or(b, "scores", std::vector<double>{});
  }

  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    require_keys(r, {"kind", "seed", "scale", "logits"}, "config.method.reference");
    c.reference_kind = get_or(r, "kind", c.reference_kind);
    check_one_of(c.reference_kind, {"uniform", "random", "explicit"}, "method.reference.kind");
    c.reference_seed = get_or(r, "seed", std::uint64_t{0});
    c.reference_scale = get_or(r, "scale", 1.0);
    c.reference_logits = get_or(r, "logits", std::vector<double>{});
  }

  if (j.contains("regularizer")) {
    const auto& r = j.at("regularizer");
    require_keys(r, {"kind", "anchor", "alpha", "lambda", "coeff", "radius"},
                 "config.method.regularizer");
    c.reg_kind = get_or(r, "kind", c.reg_kind);
    check_one_of(c.reg_kind, {"none", "ce_penalty", "ce_constraint", "l2_ball", "kl_penalty"},
                 "method.regularizer.kind");
    c.reg_anchor = get_or(r, "anchor", c.reg_anchor);
    check_one_of(c.reg_anchor, {"reference", "uniform", "preferred"},
                 "method.regularizer.anchor");
    c.reg_alpha = get_or(r, "alpha", 0.0);
    c.reg_lambda = get_or(r, "lambda", 0.0);
    c.reg_coeff = get_or(r, "coeff", 0.0);
    c.reg_radius = get_or(r, "radius", 0.0);
    if (c.reg_alpha < 0 || c.reg_lambda < 0 || c.reg_coeff < 0 || c.reg_radius < 0)
      throw schema_error("config.method.regularizer: coefficients must be >= 0");
  }
  return c;
}

TrainSection parse_train(const json& j) {
  require_keys(j,
               {"steps", "batch_size", "learning_rate", "schedule", "warmup_steps", "seed",
                "trace_every", "init"},
               "config.train");
  TrainSection c;
  c.steps = get_or(j, "steps", 0);
  if (c.steps < 0) throw schema_error("config.train.steps: must be >= 0");
  c.batch_size = get_or(j, "batch_size", 0);
  if (c.batch_size < 0) throw schema_error("config.train.batch_size: must be >= 0");
  c.learning_rate = get_or(j, "learning_rate", 0.1);
  if (c.steps > 0 && !(c.learning_rate > 0.0))
    throw schema_error("config.train.learning_rate: must be > 0");
  c.schedule = get_or(j, "schedule", c.schedule);
  check_one_of(c.schedule, {"constant", "linear_warmup"}, "train.schedule");
  c.warmup_steps = get_or(j, "warmup_steps", 0);
  if (c.warmup_steps < 0 || (c.steps > 0 && c.warmup_steps > c.steps))
    throw schema_error("config.train.warmup_steps: must be in [0, steps]");
  c.seed = get_or(j, "seed", std::uint64_t{0});
  c.trace_every = get_or(j, "trace_every", 1);
  if (c.trace_every < 1) throw schema_error("config.train.trace_every: must be >= 1");
  c.init = get_or(j, "init", c.init);
  check_one_of(c.init, {"reference", "uniform", "linear_zero"}, "train.init");
  return c;
}

DiagnosticsSection parse_diagnostics(const json& j) {
  require_keys(j, {"coverage_variants", "max_triples", "grid"}, "config.diagnostics");
  DiagnosticsSection c;
  c.coverage_variants = get_or(j, "coverage_variants", c.coverage_variants);
  for (const auto& v : c.coverage_variants)
    check_one_of(v, {"density_ratio", "linear_eigenvalue", "empirical_ratio"},
                 "diagnostics.coverage_variants");
  c.max_triples = get_or(j, "max_triples", c.max_triples);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    require_keys(g, {"lo", "hi", "points", "refinement_passes"}, "config.diagnostics.grid");
    c.grid_lo = get_or(g, "lo", c.grid_lo);
    c.grid_hi = get_or(g, "hi", c.grid_hi);
    c.grid_points = get_or(g, "points", c.grid_points);
    c.grid_refinements = get_or(g, "refinement_passes", c.grid_refinements);
    if (!(c.grid_lo < c.grid_hi) || c.grid_points < 3)
      throw schema_error("config.diagnostics.grid: need lo < hi and points >= 3");
  }
  return c;
}

OutputSection parse_output(const json& j) {
  require_keys(j, {"directory", "formats"}, "config.output");
  OutputSection c;
  c.directory = get_or(j, "directory", c.directory);
  c.formats = get_or(j, "formats", c.formats);
  for (const auto& f : c.formats) check_one_of(f, {"json", "csv"}, "output.formats");
  return c;
}

SweepSection parse_sweep(const json& j) {
  require_keys(j, {"beta", "loss", "base", "seed", "workers"}, "config.sweep");
  SweepSection c;
  c.beta = get_or(j, "beta", std::vector<double>{});
  c.loss = get_or(j, "loss", std::vector<std::string>{});
  c.base = get_or(j, "base", std::vector<std::string>{});
  c.seed = get_or(j, "seed", std::vector<std::uint64_t>{});
  c.workers = get_or(j, "workers", 0);
  for (const auto& l : c.loss)
    check_one_of(l, {"logistic", "squared", "ipo", "hinge", "shifted_logistic"}, "sweep.loss");
  for (const auto& b : c.base) check_one_of(b, {"uniform", "reference"}, "sweep.base");
  if (j.contains("beta") && c.beta.empty()) throw schema_error("config.sweep.beta: empty list");
  if (j.contains("loss") && c.loss.empty()) throw schema_error("config.sweep.loss: empty list");
  if (j.contains("base") && c.base.empty()) throw schema_error("config.sweep.base: empty list");
  if (j.contains("seed") && c.seed.empty()) throw schema_error("config.sweep.seed: empty list");
  if (c.beta.empty() && c.loss.empty() && c.base.empty() && c.seed.empty())
    throw schema_error("config.sweep: at least one non-empty list required");
  return c;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  require_keys(doc,
               {"version", "instance", "data", "method", "train", "diagnostics", "output",
                "sweep"},
               "config");
  ExperimentConfig c;
  c.version = get_or(doc, "version", 0);
  if (c.version != 1) throw schema_error("config.version: expected 1");
  if (!doc.contains("instance")) throw schema_error("config: missing instance section");
  if (!doc.contains("data")) throw schema_error("config: missing data section");
  c.instance = parse_instance(doc.at("instance"));
  c.data = parse_data(doc.at("data"));
  if (doc.contains("method")) c.method = parse_method(doc.at("method"));
  if (doc.contains("train")) c.train = parse_train(doc.at("train"));
  if (doc.contains("diagnostics")) c.diagnostics = parse_diagnostics(doc.at("diagnostics"));
  if (doc.contains("output")) c.output = parse_output(doc.at("output"));
  if (doc.contains("sweep")) c.sweep = parse_sweep(doc.at("sweep"));

  if (c.train.batch_size == 0) c.train.batch_size = c.data.n;
  if (c.train.batch_size > c.data.n) throw schema_error("config.train.batch_size: exceeds data.n");
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(std::string("config parse: ") + e.what());
  }
  return parse_config(doc);
}

nlohmann::json resolved_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["instance"] = {
      {"num_contexts", c.instance.num_contexts},
      {"num_responses", c.instance.num_responses},
      {"response_lengths", c.instance.response_lengths},
      {"r_star",
       {{"kind", c.instance.r_star_kind},
        {"values", c.instance.r_star_values},
        {"seed", c.instance.r_star_seed},
        {"scale", c.instance.r_star_scale}}},
      {"d_x", {{"kind", c.instance.d_x_kind}, {"values", c.instance.d_x_values}}},
      {"d_y",
       {{"kind", c.instance.d_y_kind},
        {"values", c.instance.d_y_values},
        {"exclude", c.instance.d_y_exclude}}},
      {"preference", c.instance.preference},
      {"eta", c.instance.eta_values},
      {"features",
       {{"kind", c.instance.features_kind},
        {"dim", c.instance.feature_dim},
        {"seed", c.instance.features_seed},
        {"scale", c.instance.features_scale},
        {"values", c.instance.features_values}}}};
  j["data"] = {{"n", c.data.n}, {"seed", c.data.seed}};
  j["method"] = {{"preset", c.method.preset},
                 {"loss", c.method.loss_kind},
                 {"beta", c.method.beta},
                 {"tau", c.method.tau},
                 {"gamma", c.method.gamma},
                 {"base",
                  {{"kind", c.method.base_kind},
                   {"alpha", c.method.base_alpha},
                   {"scores", c.method.base_scores}}},
                 {"reference",
                  {{"kind", c.method.reference_kind},
                   {"seed", c.method.reference_seed},
                   {"scale", c.method.reference_scale},
                   {"logits", c.method.reference_logits}}},
                 {"regularizer",
                  {{"kind", c.method.reg_kind},
                   {"anchor", c.method.reg_anchor},
                   {"alpha", c.method.reg_alpha},
                   {"lambda", c.method.reg_lambda},
                   {"coeff", c.method.reg_coeff},
                   {"radius", c.method.reg_radius}}}};
  j["train"] = {{"steps", c.train.steps},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"schedule", c.train.schedule},
                {"warmup_steps", c.train.warmup_steps},
                {"seed", c.train.seed},
                {"trace_every", c.train.trace_every},
                {"init", c.train.init}};
  j["diagnostics"] = {{"coverage_variants", c.diagnostics.coverage_variants},
                      {"max_triples", c.diagnostics.max_triples},
                      {"grid",
                       {{"lo", c.diagnostics.grid_lo},
                        {"hi", c.diagnostics.grid_hi},
                        {"points", c.diagnostics.grid_points},
                        {"refinement_passes", c.diagnostics.grid_refinements}}}};
  j["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
  if (c.sweep) {
    j["sweep"] = {{"beta", c.sweep->beta},
                  {"loss", c.sweep->loss},
                  {"base", c.sweep->base},
                  {"seed", c.sweep->seed},
                  {"workers", c.sweep->workers}};
  }
  return j;
}

nlohmann::json provenance_json(const ExperimentConfig& c) {
  nlohmann::json j = resolved_json(c);
  j["output"]["directory"] = "";
  return j;
}

}  // namespace prefopt
