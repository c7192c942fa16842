#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbgw/combinat.hpp"
#include "mbgw/genealogy.hpp"
#include "mbgw/model.hpp"
#include "mbgw/spinesim.hpp"
#include "mbgw/verify.hpp"

namespace mbgw::io {

using nlohmann::json;

// "0.25", "1/3", "2.5e-1" parsed exactly; throws ValidationError.
Rational parse_rational(const std::string& s);

// Model schema: {"d", "alpha", "offspring": [[{"counts", "p"}...]...], "xi": [...] | "perron"}.
// Probabilities may be numbers or exact strings; when every atom of a type is
// given as a string the law must sum to 1 exactly. Errors carry a JSON path.
ModelSpec parse_model(const json& j);
ModelSpec load_model(const std::string& path);
json model_to_json(const ModelSpec& spec);

// Event logs as JSONL: a header line then one line per event.
std::string event_log_jsonl(const EventLog& log);
// Same with a "marks" object on events that moved marks.
std::string marked_run_jsonl(const MarkedRun& run);
EventLog parse_event_log_jsonl(const std::string& text);

json partition_to_json(const ColouredPartition& P);
json path_to_json(const AncestralPath& path);
json record_to_json(const SplitRecord& rec);
// Mirrors record_to_json; colours and the root type are 1-based in JSON.
SplitRecord record_from_json(const json& j, int d);

json result_to_json(const CriterionResult& r);
std::string results_csv(const std::vector<CriterionResult>& rs);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace mbgw::io
