#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefopt/core.hpp"
#include "prefopt/diagnostics.hpp"
#include "prefopt/optimizer.hpp"

namespace prefopt {

using Json = nlohmann::json;

// Round-trippable, locale-independent double formatting for CSV payloads.
std::string fmt_double(double v);

std::string read_text_file(const std::string& path);  // schema_error when missing
void write_text_file(const std::string& path, const std::string& content);

// Rejects keys outside `allowed` (strict schemas; unknown keys are config
// bugs, not extensions).
void require_keys(const Json& obj, const std::vector<std::string>& allowed,
                  const std::string& context);

// ---------------------------------------------------------------------------
// Policy documents (schema prefopt.policy.v1)
// ---------------------------------------------------------------------------

Json policy_to_json(const TabularPolicy& policy, const Json& provenance = Json::object());
Json policy_to_json(const LinearSoftmaxPolicy& policy, const Json& provenance = Json::object());

struct LoadedPolicy {
  std::optional<TabularPolicy> tabular;
  std::optional<LinearSoftmaxPolicy> linear;

  PolicyView view() const {
    if (tabular) return PolicyView(*tabular);
    return PolicyView(*linear);
  }
};

LoadedPolicy policy_from_json(const Json& doc);

// ---------------------------------------------------------------------------
// Dataset documents
// ---------------------------------------------------------------------------

Json dataset_to_json(const PreferenceDataset& data, const Json& provenance = Json::object());
PreferenceDataset dataset_from_json(const Json& doc);

// CSV with '#'-prefixed provenance lines, then "x,y,y_prime,omega".
std::string dataset_to_csv(const PreferenceDataset& data, const Json& provenance);
PreferenceDataset dataset_from_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Traces and reports
// ---------------------------------------------------------------------------

std::string trace_to_csv(const TrainTrace& trace, const Json& provenance);

Json report_to_json(const DiagnosticsReport& report, const Json& provenance = Json::object());

// One data row per report; keys describe the experiment cell.
std::string report_csv_header();
std::string report_csv_row(const std::string& cell_key, std::uint64_t instance_seed,
                           const std::string& loss_name, const std::string& base_name,
                           const DiagnosticsReport& report, const std::string& error = "");

}  // namespace prefopt
