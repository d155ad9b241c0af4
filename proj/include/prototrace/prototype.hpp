#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "prototrace/cluster.hpp"
#include "prototrace/dataio.hpp"
#include "prototrace/metrics.hpp"

namespace prototrace {

/// A labeled cluster center and the provenance shown with its predictions.
struct Center {
  std::string center_id;
  Vector vector;
  std::string label;
  double purity = 1.0;
  std::size_t member_count = 1;
  std::vector<std::string> exemplar_ids;
  std::optional<std::string> annotation;

  friend bool operator==(const Center& a, const Center& b) {
    return a.center_id == b.center_id && a.vector.size() == b.vector.size() &&
           a.vector == b.vector && a.label == b.label && a.purity == b.purity &&
           a.member_count == b.member_count && a.exemplar_ids == b.exemplar_ids &&
           a.annotation == b.annotation;
  }
};

/// Nearest-center classifier over a small set of labeled prototypes.
class PrototypeModel {
public:
  PrototypeModel(std::size_t dim, std::string source, std::vector<Center> centers);

  std::size_t dim() const { return dim_; }
  const std::string& source() const { return source_; }
  const std::vector<Center>& centers() const { return centers_; }
  std::size_t size() const { return centers_.size(); }

  /// Center with this id, or nullptr.
  const Center* find(const std::string& center_id) const;

  friend bool operator==(const PrototypeModel&, const PrototypeModel&) = default;

private:
  std::size_t dim_;
  std::string source_;
  std::vector<Center> centers_;
};

struct Prediction {
  std::string label;
  std::string center_id;
  double distance = 0.0;
  /// Runner-up distance minus winning distance; absent for one-center models.
  std::optional<double> margin;
  std::string source;
};

struct Explanation {
  std::string center_id;
  std::string label;
  std::optional<std::string> annotation;
  std::vector<std::string> exemplar_ids;
  double purity = 0.0;
  double distance = 0.0;
  std::optional<double> margin;
};

/// One center per cluster, labeled by member majority; exemplars are the
/// members nearest the mean (by distance, then id). Center ids are c0, c1, ...
PrototypeModel build_prototype_model(const ClusteringResult& result, const RepresentationSet& set,
                                     std::size_t exemplars_per_center, const std::string& source);

/// Nearest center by Euclidean distance; ties go to the smaller center id.
Prediction predict(const PrototypeModel& model, const Vector& query);

Explanation explain(const PrototypeModel& model, const Prediction& prediction);

PrototypeModel annotate_center(const PrototypeModel& model, const std::string& center_id,
                               const std::string& text);

Metrics evaluate(const PrototypeModel& model, const RepresentationSet& set);

}  // namespace prototrace
