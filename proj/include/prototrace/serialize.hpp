#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prototrace/adapt.hpp"
#include "prototrace/cluster.hpp"
#include "prototrace/metrics.hpp"
#include "prototrace/net.hpp"
#include "prototrace/prototype.hpp"
#include "prototrace/unify.hpp"

// JSON file formats. Every document carries "version": 1 and loaders reject
// any other version. Keys are written in a fixed order and numbers in
// shortest round-trip form, so save -> load -> save is byte-stable.
namespace prototrace::json {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

std::string dump(const Json& doc);
Json parse(const std::string& text, const std::string& origin = "<memory>");
Json read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

Json to_json(const ClusteringResult& result);
ClusteringResult clustering_from_json(const Json& doc);

Json to_json(const ClusterCountReport& report);

Json to_json(const PrototypeModel& model);
PrototypeModel model_from_json(const Json& doc);

Json to_json(const Metrics& metrics);
Metrics metrics_from_json(const Json& doc);

Json to_json(const Prediction& prediction);
Prediction prediction_from_json(const Json& doc);

/// {"version":1,"predictions":[{"id":..., <prediction fields>}, ...]}
Json predictions_to_json(const std::vector<std::pair<std::string, Prediction>>& predictions);
std::vector<std::pair<std::string, Prediction>> predictions_from_json(const Json& doc);

Json to_json(const Explanation& explanation);

Json to_json(const Projection& projection);
Projection projection_from_json(const Json& doc);

Json to_json(const UnifiedModel& model);
UnifiedModel unified_from_json(const Json& doc);

Json to_json(const FeedforwardNetwork& net);
/// The network schema does not record the output kind; the caller states it.
FeedforwardNetwork network_from_json(const Json& doc, OutputKind output = OutputKind::Softmax);

Json to_json(const TrainHistory& history);

Json to_json(const DAModel& model);
DAModel da_model_from_json(const Json& doc);

Json to_json(const std::vector<DALossBreakdown>& history);
Json to_json(const DiscrepancyReport& report);
Json to_json(const DAPrediction& prediction, const std::vector<std::string>& classes);

}  // namespace prototrace::json
