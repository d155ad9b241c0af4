#include "prototrace/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "prototrace/error.hpp"

namespace prototrace {

PrototypeModel::PrototypeModel(std::size_t dim, std::string source, std::vector<Center> centers)
    : dim_(dim), source_(std::move(source)), centers_(std::move(centers)) {
  if (dim_ == 0) throw InvalidArgument("model dim must be positive");
  if (centers_.empty()) throw InvalidArgument("model needs at least one center");
  std::set<std::string> ids;
  for (const Center& c : centers_) {
    if (static_cast<std::size_t>(c.vector.size()) != dim_) {
      throw DimensionError("center '" + c.center_id + "' has dim " +
                           std::to_string(c.vector.size()) + ", model dim is " +
                           std::to_string(dim_));
    }
    if (!c.vector.allFinite()) throw InvalidArgument("center '" + c.center_id + "' is not finite");
    if (!ids.insert(c.center_id).second) {
      throw InvalidArgument("duplicate center id '" + c.center_id + "'");
    }
    if (!(c.purity >= 0.0 && c.purity <= 1.0)) {
      throw InvalidArgument("center '" + c.center_id + "' purity outside [0, 1]");
    }
    if (c.member_count == 0) {
      throw InvalidArgument("center '" + c.center_id + "' has no members");
    }
  }
}

const Center* PrototypeModel::find(const std::string& center_id) const {
  for (const Center& c : centers_) {
    if (c.center_id == center_id) return &c;
  }
  return nullptr;
}

PrototypeModel build_prototype_model(const ClusteringResult& result, const RepresentationSet& set,
                                     std::size_t exemplars_per_center, const std::string& source) {
  if (exemplars_per_center == 0) throw InvalidArgument("exemplars_per_center must be positive");
  if (!set.fully_labeled()) throw InvalidArgument("prototype models need a labeled set");
  result.validate(set);

  std::vector<double> purity;
  const auto labels = majority_labels(result, set, &purity);
  const auto groups = result.members();

  std::vector<Center> centers;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    Center center;
    center.center_id = "c" + std::to_string(c);
    center.vector = result.means[c];
    center.label = labels[c];
    center.purity = purity[c];
    center.member_count = groups[c].size();

    std::vector<std::pair<double, const std::string*>> ranked;
    for (std::size_t i : groups[c]) {
      ranked.emplace_back((set[i].vector - center.vector).norm(), &set[i].id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : *a.second < *b.second;
    });
    const std::size_t keep = std::min(exemplars_per_center, ranked.size());
    for (std::size_t e = 0; e < keep; ++e) center.exemplar_ids.push_back(*ranked[e].second);
    centers.push_back(std::move(center));
  }
  return {set.dim(), source, std::move(centers)};
}

Prediction predict(const PrototypeModel& model, const Vector& query) {
  if (static_cast<std::size_t>(query.size()) != model.dim()) {
    throw DimensionError("query has dim " + std::to_string(query.size()) + ", model expects dim " +
                         std::to_string(model.dim()));
  }
  const auto& centers = model.centers();
  std::size_t best = 0;
  std::size_t runner_up = centers.size();
  double best_d = (query - centers[0].vector).norm();
  double runner_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = (query - centers[c].vector).norm();
    const bool wins = d < best_d || (d == best_d && centers[c].center_id < centers[best].center_id);
    if (wins) {
      runner_d = best_d;
      runner_up = best;
      best_d = d;
      best = c;
    } else if (runner_up == centers.size() || d < runner_d) {
      runner_d = d;
      runner_up = c;
    }
  }
  Prediction p;
  p.label = centers[best].label;
  p.center_id = centers[best].center_id;
  p.distance = best_d;
  if (runner_up != centers.size()) p.margin = runner_d - best_d;
  p.source = model.source();
  return p;
}

Explanation explain(const PrototypeModel& model, const Prediction& prediction) {
  const Center* center = model.find(prediction.center_id);
  if (!center) throw InvalidArgument("unknown center id '" + prediction.center_id + "'");
  Explanation e;
  e.center_id = center->center_id;
  e.label = center->label;
  e.annotation = center->annotation;
  e.exemplar_ids = center->exemplar_ids;
  e.purity = center->purity;
  e.distance = prediction.distance;
  e.margin = prediction.margin;
  return e;
}

PrototypeModel annotate_center(const PrototypeModel& model, const std::string& center_id,
                               const std::string& text) {
  if (!model.find(center_id)) throw InvalidArgument("unknown center id '" + center_id + "'");
  std::vector<Center> centers = model.centers();
  for (Center& c : centers) {
    if (c.center_id == center_id) c.annotation = text;
  }
  return {model.dim(), model.source(), std::move(centers)};
}

Metrics evaluate(const PrototypeModel& model, const RepresentationSet& set) {
  if (!set.fully_labeled()) throw InvalidArgument("evaluation needs a labeled set");
  if (set.dim() != model.dim()) {
    throw DimensionError("evaluation set has dim " + std::to_string(set.dim()) +
                         ", model expects dim " + std::to_string(model.dim()));
  }
  std::vector<std::string> truth, predicted;
  for (const Item& item : set.items()) {
    truth.push_back(*item.label);
    predicted.push_back(predict(model, item.vector).label);
  }
  return compute_metrics(truth, predicted);
}

}  // namespace prototrace
