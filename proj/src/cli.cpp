#include "prefopt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "prefopt/acceptance.hpp"
#include "prefopt/diagnostics.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/experiment.hpp"
#include "prefopt/json_io.hpp"
#include "prefopt/oracle.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prefopt::cli {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  std::uint64_t budget = 4096;
};

ExperimentConfig load_config(const CommonArgs& args) {
  auto cfg = parse_config_file(args.config_path);
  if (!args.out_dir.empty()) cfg.output.directory = args.out_dir;
  return cfg;
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw schema_error(path + ": " + e.what());
  }
}

// pi_star for a method: the link-based construction when the loss has one,
// otherwise a grid-argmin fallback (hinge-type losses) flagged in the report.
struct BenchmarkOrFallback {
  TabularPolicy pi_star;
  bool fallback = false;
};

BenchmarkOrFallback make_benchmark(const GenerativeModel& model, const LossSpec& loss,
                                   const BasePolicy& base, const DiagnosticsSection& diag) {
  if (loss.proper()) {
    return {benchmark_policy(model, loss, base).pi_star, false};
  }
  const int X = model.num_contexts(), Y = model.num_responses();
  const Matrix logmu = base.log_weight_table(X, Y);
  oracle::GridSpec grid{diag.grid_lo, diag.grid_hi, diag.grid_points, diag.grid_refinements};
  Matrix logits(X, Y);
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      double mean = 0.0;
      for (int yp = 0; yp < Y; ++yp)
        mean += oracle::grid_minimize_conditional(loss, model.preference_prob(x, y, yp), grid).v;
      logits(x, y) = mean / Y + logmu(x, y);
    }
  }
  return {TabularPolicy(std::move(logits)), true};
}

DiagnosticsReport run_diagnostics(const ExperimentConfig& cfg, const BuiltInstance& instance,
                                  const BuiltMethod& method, const PolicyView& policy,
                                  const TabularPolicy& pi_star) {
  VerifyOptions opt;
  opt.coverage = coverage_variant_from_string(cfg.diagnostics.coverage_variants.empty()
                                                  ? "density_ratio"
                                                  : cfg.diagnostics.coverage_variants.front());
  if (opt.coverage == CoverageVariant::LinearEigenvalue) {
    if (!instance.features)
      throw schema_error("diagnostics: linear_eigenvalue coverage needs instance features");
    opt.features = &*instance.features;
  }
  opt.budget.max_triples = cfg.diagnostics.max_triples;
  return verify_lemmas(policy, PolicyView(pi_star), instance.model, method.loss, method.base,
                       opt);
}

int cmd_gen(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto instance = build_instance(cfg);
  const auto data = sample_dataset(instance.model, cfg.data.n, cfg.data.seed);
  fs::create_directories(cfg.output.directory);
  const Json prov = provenance_json(cfg);
  write_text_file(cfg.output.directory + "/instance.json",
                  instance_to_json(instance, prov).dump(2) + "\n");
  write_text_file(cfg.output.directory + "/dataset.csv", dataset_to_csv(data, prov));
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto instance = instance_from_json(read_json_file(cfg.output.directory + "/instance.json"));
  const auto data = dataset_from_csv(read_text_file(cfg.output.directory + "/dataset.csv"));
  if (data.empty()) throw schema_error("train: dataset is empty");

  const auto method = build_method(cfg, instance, &data);
  const auto tc = train_config(cfg, method, data.size());
  const Json prov = provenance_json(cfg);

  Json policy_doc;
  TrainTrace trace;
  if (cfg.train.init == "linear_zero") {
    if (!instance.features)
      throw schema_error("train: init 'linear_zero' needs an instance feature table");
    const LinearSoftmaxPolicy init(std::vector<double>(static_cast<std::size_t>(
                                       instance.features->dim()), 0.0),
                                   *instance.features);
    auto result = train(init, data, method.loss, method.base, tc);
    policy_doc = policy_to_json(result.policy, prov);
    trace = std::move(result.trace);
  } else {
    auto result = train(initial_policy(cfg, instance), data, method.loss, method.base, tc);
    policy_doc = policy_to_json(result.policy, prov);
    trace = std::move(result.trace);
  }

  write_text_file(cfg.output.directory + "/policy.json", policy_doc.dump(2) + "\n");
  write_text_file(cfg.output.directory + "/trace.csv", trace_to_csv(trace, prov));
  return trace.diverged ? 3 : 0;
}

int cmd_diagnose(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto instance = instance_from_json(read_json_file(cfg.output.directory + "/instance.json"));
  const auto loaded = policy_from_json(read_json_file(cfg.output.directory + "/policy.json"));
  const auto method = build_method(cfg, instance, nullptr);

  const auto bench = make_benchmark(instance.model, method.loss, method.base, cfg.diagnostics);
  const auto report = run_diagnostics(cfg, instance, method, loaded.view(), bench.pi_star);

  Json prov = provenance_json(cfg);
  Json doc = report_to_json(report, prov);
  doc["benchmark_fallback"] = bench.fallback;

  // every configured coverage variant, alongside the one used in the checks
  Json cov_all = Json::object();
  for (const auto& name : cfg.diagnostics.coverage_variants) {
    const auto variant = coverage_variant_from_string(name);
    if (variant == CoverageVariant::LinearEigenvalue && !instance.features) {
      cov_all[name] = "unavailable (no features)";
      continue;
    }
    CoverageResult cov;
    switch (variant) {
      case CoverageVariant::DensityRatio:
        cov = coverage_density_ratio(PolicyView(bench.pi_star), instance.model);
        break;
      case CoverageVariant::LinearEigenvalue:
        cov = coverage_linear_eigenvalue(*instance.features, PolicyView(bench.pi_star),
                                         instance.model);
        break;
      case CoverageVariant::EmpiricalRatio:
        cov = coverage_empirical_ratio(loaded.view(), PolicyView(bench.pi_star),
                                       instance.model);
        break;
    }
    cov_all[name] = cov.infinite ? Json("inf") : Json(cov.value);
  }
  doc["coverage_all"] = std::move(cov_all);
  write_text_file(cfg.output.directory + "/report.json", doc.dump(2) + "\n");
  write_text_file(cfg.output.directory + "/report.csv",
                  report_csv_header() +
                      report_csv_row("single", cfg.data.seed, method.loss_label,
                                     method.base_label, report));
  return 0;
}

struct SweepCell {
  std::string key;
  ExperimentConfig cfg;
};

int cmd_sweep(const CommonArgs& args) {
  const auto base_cfg = load_config(args);
  if (!base_cfg.sweep) throw schema_error("sweep: config has no sweep section");
  const auto& sw = *base_cfg.sweep;

  const std::vector<double> betas = sw.beta.empty() ? std::vector<double>{base_cfg.method.beta}
                                                    : sw.beta;
  const std::vector<std::string> losses =
      sw.loss.empty() ? std::vector<std::string>{base_cfg.method.loss_kind} : sw.loss;
  const std::vector<std::string> bases =
      sw.base.empty() ? std::vector<std::string>{base_cfg.method.base_kind} : sw.base;
  const std::vector<std::uint64_t> seeds =
      sw.seed.empty() ? std::vector<std::uint64_t>{base_cfg.data.seed} : sw.seed;

  std::vector<SweepCell> cells;
  for (const auto& loss : losses)
    for (double beta : betas)
      for (const auto& base : bases)
        for (std::uint64_t seed : seeds) {
          ExperimentConfig cfg = base_cfg;
          cfg.method.preset.clear();
          cfg.method.loss_kind = loss;
          cfg.method.beta = beta;
          cfg.method.base_kind = base;
          cfg.data.seed = seed;
          std::ostringstream key;
          key << "loss=" << loss << "|beta=" << Json(beta).dump() << "|base=" << base
              << "|seed=" << seed;
          cells.push_back({key.str(), std::move(cfg)});
        }
  if (cells.size() > args.budget)
    throw budget_error("sweep: " + std::to_string(cells.size()) + " cells exceed --budget " +
                       std::to_string(args.budget));

  std::vector<std::string> rows(cells.size());
  std::vector<int> ok(cells.size(), 0);

#ifdef _OPENMP
  const int workers = args.workers > 0 ? args.workers : omp_get_max_threads();
#else
  const int workers = 1;
#endif
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (long long i = 0; i < static_cast<long long>(cells.size()); ++i) {
    auto& cell = cells[static_cast<std::size_t>(i)];
    try {
      const auto instance = build_instance(cell.cfg);
      const auto data = sample_dataset(instance.model, cell.cfg.data.n, cell.cfg.data.seed);
      const auto method = build_method(cell.cfg, instance, &data);
      const auto init = initial_policy(cell.cfg, instance);
      const auto tc = train_config(cell.cfg, method, data.size());
      auto result = train(init, data, method.loss, method.base, tc);
      const auto bench =
          make_benchmark(instance.model, method.loss, method.base, cell.cfg.diagnostics);
      const auto report =
          run_diagnostics(cell.cfg, instance, method, PolicyView(result.policy), bench.pi_star);
      rows[static_cast<std::size_t>(i)] =
          report_csv_row(cell.key, cell.cfg.data.seed, method.loss_label, method.base_label,
                         report);
      ok[static_cast<std::size_t>(i)] = 1;
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      DiagnosticsReport empty;
      rows[static_cast<std::size_t>(i)] =
          report_csv_row(cell.key, cell.cfg.data.seed, cell.cfg.method.loss_kind,
                         cell.cfg.method.base_kind, empty, msg);
    }
  }

  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cells[a].key < cells[b].key; });

  std::string csv = report_csv_header();
  for (std::size_t i : order) csv += rows[i];
  fs::create_directories(base_cfg.output.directory);
  write_text_file(base_cfg.output.directory + "/sweep.csv", csv);

  const bool any_ok = std::any_of(ok.begin(), ok.end(), [](int v) { return v == 1; });
  return any_ok ? 0 : 1;
}

int cmd_verify(bool inject_bad_curvature) {
  acceptance::Options opt;
  opt.inject_bad_curvature = inject_bad_curvature;
  const auto results = acceptance::run_all(opt, &std::cout);
  return acceptance::all_passed(results) ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"prefopt: a desk-scale laboratory for offline preference optimization"};
  app.require_subcommand(1);

  CommonArgs args;
  bool inject_bad_curvature = false;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    if (need_config)
      cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--workers", args.workers, "worker threads for sweep cells");
    cmd->add_option("--budget", args.budget, "max sweep cells");
  };

  auto* gen = app.add_subcommand("gen", "generate the instance and dataset files");
  add_common(gen, true);
  auto* train = app.add_subcommand("train", "train a policy on a generated dataset");
  add_common(train, true);
  auto* diagnose = app.add_subcommand("diagnose", "verify Theorem 1 / Lemmas 1-3 for a policy");
  add_common(diagnose, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep; one report row per cell");
  add_common(sweep, true);
  auto* verify = app.add_subcommand("verify", "run the built-in acceptance suite");
  verify->add_flag("--inject-bad-curvature", inject_bad_curvature,
                   "testing aid: corrupt a curvature constant to prove the suite can fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(args);
    if (train->parsed()) return cmd_train(args);
    if (diagnose->parsed()) return cmd_diagnose(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (verify->parsed()) return cmd_verify(inject_bad_curvature);
  } catch (const schema_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const budget_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("prefopt");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace prefopt::cli
