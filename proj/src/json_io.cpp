#include "prefopt/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "prefopt/errors.hpp"

namespace prefopt {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw schema_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

void require_keys(const Json& obj, const std::vector<std::string>& allowed,
                  const std::string& context) {
  if (!obj.is_object()) throw schema_error(context + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw schema_error(context + ": unknown key '" + it.key() + "'");
  }
}

Json policy_to_json(const TabularPolicy& policy, const Json& provenance) {
  Json doc;
  doc["schema"] = "prefopt.policy.v1";
  doc["kind"] = "tabular";
  doc["num_contexts"] = policy.num_contexts();
  doc["num_responses"] = policy.num_responses();
  doc["logits"] = policy.logits().data();  // row-major
  if (!provenance.empty()) doc["provenance"] = provenance;
  return doc;
}

Json policy_to_json(const LinearSoftmaxPolicy& policy, const Json& provenance) {
  Json doc;
  doc["schema"] = "prefopt.policy.v1";
  doc["kind"] = "linear";
  doc["num_contexts"] = policy.num_contexts();
  doc["num_responses"] = policy.num_responses();
  doc["dim"] = policy.dim();
  doc["weights"] = policy.weights();
  doc["features"] = policy.features().values();
  if (!provenance.empty()) doc["provenance"] = provenance;
  return doc;
}

LoadedPolicy policy_from_json(const Json& doc) {
  require_keys(doc,
               {"schema", "kind", "num_contexts", "num_responses", "logits", "dim", "weights",
                "features", "provenance"},
               "policy");
  if (!doc.contains("schema") || doc["schema"] != "prefopt.policy.v1")
    throw schema_error("policy: missing or unsupported schema tag");
  const std::string kind = doc.value("kind", "");
  const int X = doc.value("num_contexts", 0);
  const int Y = doc.value("num_responses", 0);
  if (X < 1 || Y < 1) throw schema_error("policy: bad shape");
  LoadedPolicy out;
  try {
    if (kind == "tabular") {
      std::vector<double> logits = doc.at("logits").get<std::vector<double>>();
      out.tabular = TabularPolicy(Matrix(X, Y, std::move(logits)));
    } else if (kind == "linear") {
      const int d = doc.value("dim", 0);
      std::vector<double> w = doc.at("weights").get<std::vector<double>>();
      std::vector<double> f = doc.at("features").get<std::vector<double>>();
      out.linear = LinearSoftmaxPolicy(std::move(w), FeatureTable(X, Y, d, std::move(f)));
    } else {
      throw schema_error("policy: unknown kind '" + kind + "'");
    }
  } catch (const Json::exception& e) {
    throw schema_error(std::string("policy: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw schema_error(std::string("policy: ") + e.what());
  }
  return out;
}

Json dataset_to_json(const PreferenceDataset& data, const Json& provenance) {
  Json doc;
  doc["schema"] = "prefopt.dataset.v1";
  doc["seed"] = data.seed;
  Json samples = Json::array();
  for (const auto& s : data.samples) samples.push_back({s.x, s.y, s.y_prime, s.omega});
  doc["samples"] = std::move(samples);
  if (!provenance.empty()) doc["provenance"] = provenance;
  return doc;
}

PreferenceDataset dataset_from_json(const Json& doc) {
  require_keys(doc, {"schema", "seed", "samples", "provenance"}, "dataset");
  if (!doc.contains("schema") || doc["schema"] != "prefopt.dataset.v1")
    throw schema_error("dataset: missing or unsupported schema tag");
  PreferenceDataset out;
  out.seed = doc.value("seed", std::uint64_t{0});
  try {
    for (const auto& row : doc.at("samples")) {
      if (!row.is_array() || row.size() != 4) throw schema_error("dataset: bad sample row");
      out.samples.push_back(
          {row[0].get<int>(), row[1].get<int>(), row[2].get<int>(), row[3].get<int>()});
    }
  } catch (const Json::exception& e) {
    throw schema_error(std::string("dataset: ") + e.what());
  }
  return out;
}

std::string dataset_to_csv(const PreferenceDataset& data, const Json& provenance) {
  std::ostringstream out;
  out << "# schema: prefopt.dataset.v1\n";
  out << "# seed: " << data.seed << "\n";
  if (!provenance.empty()) out << "# config: " << provenance.dump() << "\n";
  out << "x,y,y_prime,omega\n";
  for (const auto& s : data.samples)
    out << s.x << ',' << s.y << ',' << s.y_prime << ',' << s.omega << '\n';
  return out.str();
}

PreferenceDataset dataset_from_csv(const std::string& text) {
  PreferenceDataset out;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      if (line.rfind("# seed: ", 0) == 0) out.seed = std::stoull(line.substr(8));
      continue;
    }
    if (!header_seen) {
      if (line != "x,y,y_prime,omega") throw schema_error("dataset csv: bad header");
      header_seen = true;
      continue;
    }
    PreferenceSample s;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d", &s.x, &s.y, &s.y_prime, &s.omega) != 4)
      throw schema_error("dataset csv: bad row '" + line + "'");
    out.samples.push_back(s);
  }
  if (!header_seen) throw schema_error("dataset csv: missing header");
  return out;
}

std::string trace_to_csv(const TrainTrace& trace, const Json& provenance) {
  std::ostringstream out;
  out << "# schema: prefopt.trace.v1\n";
  if (!provenance.empty()) out << "# config: " << provenance.dump() << "\n";
  if (trace.diverged) out << "# diverged: true\n";
  out << "step,loss,logp_preferred,logp_dispreferred,mean_margin,max_margin,"
         "curvature_at_margin,param_dist\n";
  for (const auto& r : trace.rows) {
    out << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.logp_preferred) << ','
        << fmt_double(r.logp_dispreferred) << ',' << fmt_double(r.mean_abs_margin) << ','
        << fmt_double(r.max_abs_margin) << ',' << fmt_double(r.curvature_at_margin) << ','
        << fmt_double(r.param_dist) << '\n';
  }
  return out.str();
}

namespace {

Json lemma_to_json(const LemmaCheck& l) {
  return Json{{"lhs", l.lhs}, {"rhs", l.rhs}, {"holds", l.holds}};
}

}  // namespace

Json report_to_json(const DiagnosticsReport& r, const Json& provenance) {
  Json doc;
  doc["schema"] = "prefopt.report.v1";
  doc["epsilon"] = r.epsilon;
  doc["c_mu"] = r.c_mu;
  doc["c_mu_degenerate"] = r.c_mu_degenerate;
  doc["c_mu_at_margins"] = r.c_mu_at_margins;
  doc["c_mu_scaled_argument"] = r.c_mu_scaled_argument;
  doc["range_R_measured"] = r.range_R_measured;
  doc["range_R_exponent"] = r.range_R_exponent;
  doc["coverage_C"] = r.coverage_infinite ? Json("inf") : Json(r.coverage_C);
  doc["coverage_infinite"] = r.coverage_infinite;
  doc["coverage_variant"] = r.coverage_variant;
  doc["kl_actual"] = r.kl_actual;
  doc["centered_gap_data"] = r.centered_gap_data;
  doc["centered_gap_pairwise"] = r.centered_gap_pairwise;
  doc["centered_gap_pistar"] = r.centered_gap_pistar;
  doc["log_partition_gap"] = r.log_partition_gap;
  doc["theorem_bound"] = Json{{"total", r.bound.unbounded ? Json("inf") : Json(r.bound.total)},
                              {"term_sqrt_eps", r.bound.term_sqrt_eps},
                              {"term_sqrt_ceps", r.bound.term_sqrt_ceps},
                              {"term_exp", r.bound.term_exp},
                              {"unbounded", r.bound.unbounded}};
  doc["lemma1"] = lemma_to_json(r.lemma1);
  doc["lemma2"] = lemma_to_json(r.lemma2);
  doc["lemma3"] = lemma_to_json(r.lemma3);
  doc["theorem"] = lemma_to_json(r.theorem);
  if (!provenance.empty()) doc["provenance"] = provenance;
  return doc;
}

std::string report_csv_header() {
  return "cell,instance_seed,loss,base,epsilon,c_mu,coverage_C,range_R,kl,theorem_bound,"
         "lemma1_holds,lemma2_holds,lemma3_holds,theorem_holds,error\n";
}

std::string report_csv_row(const std::string& cell_key, std::uint64_t instance_seed,
                           const std::string& loss_name, const std::string& base_name,
                           const DiagnosticsReport& r, const std::string& error) {
  std::ostringstream out;
  out << cell_key << ',' << instance_seed << ',' << loss_name << ',' << base_name << ','
      << fmt_double(r.epsilon) << ',' << fmt_double(r.c_mu) << ',' << fmt_double(r.coverage_C)
      << ',' << fmt_double(r.range_R_measured) << ',' << fmt_double(r.kl_actual) << ','
      << fmt_double(r.bound.total) << ',' << (r.lemma1.holds ? 1 : 0) << ','
      << (r.lemma2.holds ? 1 : 0) << ',' << (r.lemma3.holds ? 1 : 0) << ','
      << (r.theorem.holds ? 1 : 0) << ',' << error << '\n';
  return out.str();
}

}  // namespace prefopt
