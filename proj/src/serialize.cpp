#include "prototrace/serialize.hpp"

#include <fstream>
#include <sstream>

#include "prototrace/error.hpp"

namespace prototrace::json {

namespace {

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from(const Json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from(const Json& doc, Eigen::Index cols_if_empty = 0) {
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  const Eigen::Index cols = rows.empty() ? cols_if_empty : static_cast<Eigen::Index>(rows.front().size());
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != cols) throw LoadError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return m;
}

template <typename T>
Json optional_json(const std::optional<T>& value) {
  return value ? Json(*value) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<T>();
}

void check_version(const Json& doc, const char* what) {
  if (!doc.is_object()) throw LoadError(std::string(what) + " must be a JSON object");
  if (!doc.contains("version")) throw LoadError(std::string(what) + " has no version");
  const Json& v = doc.at("version");
  if (!v.is_number_integer() || v.get<long long>() != kFormatVersion) {
    throw LoadError(std::string(what) + " has unsupported version " + v.dump());
  }
}

// Runs a decoder, turning JSON type/key errors into LoadError.
template <typename F>
auto decode(const char* what, F&& body) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json parse(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(origin + ": invalid JSON: " + e.what());
  }
}

Json read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------

Json to_json(const ClusteringResult& r) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["k"] = r.cluster_count();
  doc["dim"] = r.dim();
  doc["seed"] = r.seed;
  doc["iterations"] = r.iterations;
  doc["inertia"] = r.inertia;
  doc["inertia_history"] = r.inertia_history;
  Json means = Json::array();
  for (const Vector& m : r.means) means.push_back(vector_json(m));
  doc["means"] = std::move(means);
  Json assignments = Json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    assignments.push_back(Json{{"id", r.ids[i]}, {"cluster", r.assignments[i]}});
  }
  doc["assignments"] = std::move(assignments);
  return doc;
}

ClusteringResult clustering_from_json(const Json& doc) {
  check_version(doc, "clustering");
  return decode("clustering", [&] {
    ClusteringResult r;
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.iterations = doc.at("iterations").get<std::size_t>();
    r.inertia = doc.at("inertia").get<double>();
    r.inertia_history = doc.at("inertia_history").get<std::vector<double>>();
    for (const Json& m : doc.at("means")) r.means.push_back(vector_from(m));
    if (r.means.size() != doc.at("k").get<std::size_t>()) throw LoadError("clustering k does not match means");
    for (const Json& a : doc.at("assignments")) {
      r.ids.push_back(a.at("id").get<std::string>());
      const auto c = a.at("cluster").get<std::size_t>();
      if (c >= r.means.size()) throw LoadError("clustering assignment out of range");
      r.assignments.push_back(c);
    }
    return r;
  });
}

Json to_json(const ClusterCountReport& report) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["chosen"] = report.chosen;
  Json candidates = Json::array();
  for (const ClusterCountCandidate& c : report.candidates) {
    Json entry;
    entry["k"] = c.k;
    entry["purity"] = c.purity;
    Json metrics = to_json(c.metrics);
    metrics.erase("version");
    entry["metrics"] = std::move(metrics);
    candidates.push_back(std::move(entry));
  }
  doc["candidates"] = std::move(candidates);
  return doc;
}

// ---------------------------------------------------------------------------

Json to_json(const PrototypeModel& model) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["dim"] = model.dim();
  doc["source"] = model.source();
  doc["metric"] = "euclidean";
  Json centers = Json::array();
  for (const Center& c : model.centers()) {
    Json entry;
    entry["center_id"] = c.center_id;
    entry["vector"] = vector_json(c.vector);
    entry["label"] = c.label;
    entry["purity"] = c.purity;
    entry["member_count"] = c.member_count;
    entry["exemplar_ids"] = c.exemplar_ids;
    entry["annotation"] = optional_json(c.annotation);
    centers.push_back(std::move(entry));
  }
  doc["centers"] = std::move(centers);
  return doc;
}

PrototypeModel model_from_json(const Json& doc) {
  check_version(doc, "prototype model");
  return decode("prototype model", [&] {
    const auto metric = doc.at("metric").get<std::string>();
    if (metric != "euclidean") throw LoadError("unsupported metric '" + metric + "'");
    std::vector<Center> centers;
    for (const Json& entry : doc.at("centers")) {
      Center c;
      c.center_id = entry.at("center_id").get<std::string>();
      c.vector = vector_from(entry.at("vector"));
      c.label = entry.at("label").get<std::string>();
      c.purity = entry.at("purity").get<double>();
      c.member_count = entry.at("member_count").get<std::size_t>();
      c.exemplar_ids = entry.at("exemplar_ids").get<std::vector<std::string>>();
      c.annotation = optional_from<std::string>(entry, "annotation");
      centers.push_back(std::move(c));
    }
    return PrototypeModel(doc.at("dim").get<std::size_t>(), doc.at("source").get<std::string>(),
                          std::move(centers));
  });
}

Json to_json(const Metrics& m) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["accuracy"] = m.accuracy;
  Json per_class = Json::object();
  for (const auto& [label, s] : m.per_class) {
    per_class[label] = Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  doc["per_class"] = std::move(per_class);
  doc["macro_f1"] = m.macro_f1;
  Json confusion = Json::array();
  for (const auto& [cell, count] : m.confusion) {
    confusion.push_back(Json{{"true", cell.first}, {"predicted", cell.second}, {"count", count}});
  }
  doc["confusion"] = std::move(confusion);
  doc["total"] = m.total;
  return doc;
}

Metrics metrics_from_json(const Json& doc) {
  check_version(doc, "metrics");
  return decode("metrics", [&] {
    Metrics m;
    m.accuracy = doc.at("accuracy").get<double>();
    for (const auto& [label, s] : doc.at("per_class").items()) {
      m.per_class[label] = {s.at("precision").get<double>(), s.at("recall").get<double>(),
                            s.at("f1").get<double>()};
    }
    m.macro_f1 = doc.at("macro_f1").get<double>();
    for (const Json& cell : doc.at("confusion")) {
      m.confusion[{cell.at("true").get<std::string>(), cell.at("predicted").get<std::string>()}] =
          cell.at("count").get<std::size_t>();
    }
    m.total = doc.at("total").get<std::size_t>();
    return m;
  });
}

Json to_json(const Prediction& p) {
  Json doc;
  doc["label"] = p.label;
  doc["center_id"] = p.center_id;
  doc["distance"] = p.distance;
  doc["margin"] = optional_json(p.margin);
  doc["source"] = p.source;
  return doc;
}

Prediction prediction_from_json(const Json& doc) {
  return decode("prediction", [&] {
    Prediction p;
    p.label = doc.at("label").get<std::string>();
    p.center_id = doc.at("center_id").get<std::string>();
    p.distance = doc.at("distance").get<double>();
    p.margin = optional_from<double>(doc, "margin");
    p.source = doc.at("source").get<std::string>();
    return p;
  });
}

Json predictions_to_json(const std::vector<std::pair<std::string, Prediction>>& predictions) {
  Json doc;
  doc["version"] = kFormatVersion;
  Json list = Json::array();
  for (const auto& [id, p] : predictions) {
    Json entry;
    entry["id"] = id;
    const Json fields = to_json(p);
    for (const auto& [key, value] : fields.items()) entry[key] = value;
    list.push_back(std::move(entry));
  }
  doc["predictions"] = std::move(list);
  return doc;
}

std::vector<std::pair<std::string, Prediction>> predictions_from_json(const Json& doc) {
  check_version(doc, "predictions");
  return decode("predictions", [&] {
    std::vector<std::pair<std::string, Prediction>> out;
    for (const Json& entry : doc.at("predictions")) {
      out.emplace_back(entry.at("id").get<std::string>(), prediction_from_json(entry));
    }
    return out;
  });
}

Json to_json(const Explanation& e) {
  Json doc;
  doc["center_id"] = e.center_id;
  doc["label"] = e.label;
  doc["annotation"] = optional_json(e.annotation);
  doc["exemplar_ids"] = e.exemplar_ids;
  doc["purity"] = e.purity;
  doc["distance"] = e.distance;
  doc["margin"] = optional_json(e.margin);
  return doc;
}

// ---------------------------------------------------------------------------

Json to_json(const Projection& p) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["in_dim"] = p.in_dim();
  doc["out_dim"] = p.out_dim();
  doc["mean"] = vector_json(p.mean);
  doc["components"] = matrix_json(p.components);
  return doc;
}

Projection projection_from_json(const Json& doc) {
  check_version(doc, "projection");
  return decode("projection", [&] {
    Projection p;
    p.mean = vector_from(doc.at("mean"));
    p.components = matrix_from(doc.at("components"), p.mean.size());
    if (p.in_dim() != doc.at("in_dim").get<std::size_t>() ||
        p.out_dim() != doc.at("out_dim").get<std::size_t>()) {
      throw LoadError("projection dims do not match its arrays");
    }
    p.validate();
    return p;
  });
}

Json to_json(const UnifiedModel& u) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["dim"] = u.dim();
  Json branches = Json::array();
  for (const Branch& b : u.branches()) {
    Json entry;
    entry["source"] = b.source;
    entry["projection"] = b.projection ? to_json(*b.projection) : Json(nullptr);
    entry["model"] = to_json(b.model);
    branches.push_back(std::move(entry));
  }
  doc["branches"] = std::move(branches);
  return doc;
}

UnifiedModel unified_from_json(const Json& doc) {
  check_version(doc, "unified model");
  return decode("unified model", [&] {
    std::vector<Branch> branches;
    for (const Json& entry : doc.at("branches")) {
      std::optional<Projection> projection;
      if (!entry.at("projection").is_null()) projection = projection_from_json(entry.at("projection"));
      branches.push_back(
          {entry.at("source").get<std::string>(), model_from_json(entry.at("model")), projection});
    }
    return UnifiedModel(doc.at("dim").get<std::size_t>(), std::move(branches));
  });
}

// ---------------------------------------------------------------------------

Json to_json(const FeedforwardNetwork& net) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["layer_dims"] = net.layer_dims;
  doc["dropout_rate"] = net.dropout_rate;
  doc["classes"] = net.classes;
  Json layers = Json::array();
  for (const DenseLayer& l : net.layers) {
    layers.push_back(Json{{"weights", matrix_json(l.weights)}, {"bias", vector_json(l.bias)}});
  }
  doc["layers"] = std::move(layers);
  return doc;
}

FeedforwardNetwork network_from_json(const Json& doc, OutputKind output) {
  check_version(doc, "network");
  return decode("network", [&] {
    FeedforwardNetwork net;
    net.output = output;
    net.layer_dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    net.dropout_rate = doc.at("dropout_rate").get<double>();
    net.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const Json& l : doc.at("layers")) {
      DenseLayer layer;
      layer.bias = vector_from(l.at("bias"));
      layer.weights = matrix_from(l.at("weights"));
      net.layers.push_back(std::move(layer));
    }
    try {
      net.validate();
    } catch (const Error& e) {
      throw LoadError(std::string("invalid network: ") + e.what());
    }
    return net;
  });
}

Json to_json(const TrainHistory& history) {
  Json doc;
  doc["version"] = kFormatVersion;
  Json epochs = Json::array();
  for (const EpochRecord& r : history.epochs) {
    Json entry;
    entry["epoch"] = r.epoch;
    entry["train_loss"] = r.train_loss;
    entry["train_accuracy"] = r.train_accuracy;
    entry["validation_accuracy"] = optional_json(r.validation_accuracy);
    epochs.push_back(std::move(entry));
  }
  doc["epochs"] = std::move(epochs);
  return doc;
}

Json to_json(const DAModel& model) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["extractor"] = to_json(model.extractor);
  Json heads = Json::array();
  for (const FeedforwardNetwork& h : model.heads) heads.push_back(to_json(h));
  doc["heads"] = std::move(heads);
  doc["sources"] = model.sources;
  doc["lambda_feat"] = model.lambda_feat;
  doc["lambda_class"] = model.lambda_class;
  doc["kernel"] = to_string(model.kernel);
  doc["bandwidth"] = optional_json(model.bandwidth);
  return doc;
}

DAModel da_model_from_json(const Json& doc) {
  check_version(doc, "adaptation model");
  return decode("adaptation model", [&] {
    DAModel model;
    model.extractor = network_from_json(doc.at("extractor"), OutputKind::Rectified);
    for (const Json& h : doc.at("heads")) model.heads.push_back(network_from_json(h));
    model.sources = doc.at("sources").get<std::vector<std::string>>();
    model.lambda_feat = doc.at("lambda_feat").get<double>();
    model.lambda_class = doc.at("lambda_class").get<double>();
    try {
      model.kernel = parse_kernel(doc.at("kernel").get<std::string>());
      model.bandwidth = optional_from<double>(doc, "bandwidth");
      model.validate();
    } catch (const Error& e) {
      throw LoadError(std::string("invalid adaptation model: ") + e.what());
    }
    return model;
  });
}

Json to_json(const std::vector<DALossBreakdown>& history) {
  Json doc;
  doc["version"] = kFormatVersion;
  Json epochs = Json::array();
  for (const DALossBreakdown& b : history) {
    Json entry;
    entry["epoch"] = b.epoch;
    entry["classification"] = b.classification;
    entry["feature_discrepancy"] = b.feature_discrepancy;
    entry["class_discrepancy"] = b.class_discrepancy;
    entry["total"] = b.total;
    entry["weights"] = Json{{"lambda_feat", b.lambda_feat}, {"lambda_class", b.lambda_class}};
    epochs.push_back(std::move(entry));
  }
  doc["epochs"] = std::move(epochs);
  return doc;
}

Json to_json(const DiscrepancyReport& r) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["mmd2"] = r.mmd2;
  doc["coral"] = r.coral;
  doc["kernel"] = to_string(r.kernel);
  doc["bandwidth"] = optional_json(r.bandwidth);
  return doc;
}

Json to_json(const DAPrediction& p, const std::vector<std::string>& classes) {
  Json doc;
  doc["label"] = p.label;
  Json heads = Json::array();
  for (const Vector& h : p.per_head) heads.push_back(vector_json(h));
  doc["per_head_probabilities"] = std::move(heads);
  doc["averaged_probabilities"] = vector_json(p.averaged);
  doc["classes"] = classes;
  return doc;
}

}  // namespace prototrace::json
