#include "prototrace/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prototrace/error.hpp"
#include "prototrace/rng.hpp"

namespace prototrace {

namespace {

std::vector<std::size_t> order_by_id(const RepresentationSet& set) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set[a].id < set[b].id; });
  return order;
}

void check_cluster_count(const RepresentationSet& set, std::size_t k) {
  if (set.empty()) throw InvalidArgument("cannot cluster an empty set");
  if (k == 0) throw InvalidArgument("cluster count must be positive");
  if (k > set.size()) {
    throw InvalidArgument("cluster count " + std::to_string(k) + " exceeds item count " +
                          std::to_string(set.size()));
  }
}

std::size_t nearest(const Vector& x, const std::vector<Vector>& means, double* distance = nullptr) {
  std::size_t best = 0;
  double best_d = (x - means[0]).squaredNorm();
  for (std::size_t c = 1; c < means.size(); ++c) {
    const double d = (x - means[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (distance) *distance = best_d;
  return best;
}

}  // namespace

std::vector<std::vector<std::size_t>> ClusteringResult::members() const {
  std::vector<std::vector<std::size_t>> out(means.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) out[assignments[i]].push_back(i);
  return out;
}

void ClusteringResult::validate(const RepresentationSet& set) const {
  if (means.empty()) throw InvalidArgument("clustering has no clusters");
  if (assignments.size() != set.size() || ids.size() != set.size()) {
    throw InvalidArgument("clustering covers " + std::to_string(assignments.size()) +
                          " items but the set has " + std::to_string(set.size()));
  }
  for (const Vector& mean : means) {
    if (static_cast<std::size_t>(mean.size()) != set.dim()) {
      throw DimensionError("cluster mean has dim " + std::to_string(mean.size()) +
                           ", set has dim " + std::to_string(set.dim()));
    }
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (ids[i] != set[i].id) {
      throw InvalidArgument("clustering refers to unknown id '" + ids[i] + "'");
    }
    if (assignments[i] >= means.size()) throw InvalidArgument("cluster index out of range");
  }
  const auto groups = members();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) throw InvalidArgument("cluster " + std::to_string(c) + " is empty");
    Vector centroid = Vector::Zero(static_cast<Eigen::Index>(set.dim()));
    for (std::size_t i : groups[c]) centroid += set[i].vector;
    centroid /= static_cast<double>(groups[c].size());
    if ((centroid - means[c]).cwiseAbs().maxCoeff() > 1e-9) {
      throw InvalidArgument("cluster " + std::to_string(c) + " mean is not its centroid");
    }
  }
  const double recomputed = inertia_of(set, assignments, means);
  if (std::abs(recomputed - inertia) > 1e-9 * std::max(1.0, std::abs(recomputed))) {
    throw InvalidArgument("recorded inertia does not match assignments");
  }
}

double inertia_of(const RepresentationSet& set, const std::vector<std::size_t>& assignments,
                  const std::vector<Vector>& means) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    total += (set[i].vector - means[assignments[i]]).squaredNorm();
  }
  return total;
}

std::vector<std::size_t> kmeanspp_seed_indices(const RepresentationSet& set, std::size_t k,
                                               std::uint64_t seed) {
  check_cluster_count(set, k);
  const std::size_t n = set.size();
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  std::vector<double> d2(n, 0.0);

  auto take = [&](std::size_t i) {
    chosen.push_back(i);
    taken[i] = true;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = taken[j] ? 0.0 : (set[j].vector - set[i].vector).squaredNorm();
      d2[j] = chosen.size() == 1 ? d : std::min(d2[j], d);
    }
  };

  take(rng.index(n));
  while (chosen.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      std::size_t pick = n;
      std::size_t last_positive = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (d2[j] <= 0.0) continue;
        last_positive = j;
        cumulative += d2[j];
        if (cumulative > target) {
          pick = j;
          break;
        }
      }
      take(pick < n ? pick : last_positive);
    } else {
      // Only duplicates of chosen points remain; draw uniformly among them.
      std::size_t remaining = rng.index(n - chosen.size());
      for (std::size_t j = 0; j < n; ++j) {
        if (taken[j]) continue;
        if (remaining-- == 0) {
          take(j);
          break;
        }
      }
    }
  }
  return chosen;
}

std::vector<Vector> kmeanspp_seed(const RepresentationSet& set, std::size_t k,
                                  std::uint64_t seed) {
  std::vector<Vector> centers;
  for (std::size_t i : kmeanspp_seed_indices(set, k, seed)) centers.push_back(set[i].vector);
  return centers;
}

ClusteringResult lloyd(const RepresentationSet& set, const std::vector<Vector>& init, double tol,
                       std::size_t max_iter) {
  check_cluster_count(set, init.size());
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iter == 0) throw InvalidArgument("max_iter must be positive");
  for (const Vector& m : init) {
    if (static_cast<std::size_t>(m.size()) != set.dim()) {
      throw DimensionError("initial mean has dim " + std::to_string(m.size()) + ", set has dim " +
                           std::to_string(set.dim()));
    }
  }

  const std::size_t n = set.size();
  const std::size_t k = init.size();
  const auto id_order = order_by_id(set);

  ClusteringResult result;
  result.means = init;
  result.assignments.assign(n, 0);
  for (const Item& item : set.items()) result.ids.push_back(item.id);

  std::vector<double> distance(n, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      result.assignments[i] = nearest(set[i].vector, result.means, &distance[i]);
      ++counts[result.assignments[i]];
    }

    // Refill empty clusters with the point farthest from its current mean.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i : id_order) {
        if (counts[result.assignments[i]] < 2) continue;
        if (far == n || distance[i] > distance[far]) far = i;
      }
      --counts[result.assignments[far]];
      result.assignments[far] = c;
      distance[far] = 0.0;
      ++counts[c];
    }

    std::vector<Vector> updated(k, Vector::Zero(static_cast<Eigen::Index>(set.dim())));
    for (std::size_t i : id_order) updated[result.assignments[i]] += set[i].vector;
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      updated[c] /= static_cast<double>(counts[c]);
      movement = std::max(movement, (updated[c] - result.means[c]).cwiseAbs().maxCoeff());
    }
    result.means = std::move(updated);
    result.iterations = iter;
    result.inertia = inertia_of(set, result.assignments, result.means);
    result.inertia_history.push_back(result.inertia);
    if (movement < tol) break;
  }
  return result;
}

ClusteringResult cluster(const RepresentationSet& set, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options) {
  if (options.restarts == 0) throw InvalidArgument("restarts must be positive");
  check_cluster_count(set, k);
  ClusteringResult best;
  bool have_best = false;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    const std::uint64_t run_seed = seed + r;
    ClusteringResult run =
        lloyd(set, kmeanspp_seed(set, k, run_seed), options.tol, options.max_iter);
    run.seed = run_seed;
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }
  return best;
}

std::vector<std::string> majority_labels(const ClusteringResult& result,
                                         const RepresentationSet& set,
                                         std::vector<double>* purity) {
  const auto groups = result.members();
  std::vector<std::string> labels;
  if (purity) purity->clear();
  for (const auto& group : groups) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i : group) {
      if (!set[i].label) throw InvalidArgument("item '" + set[i].id + "' is unlabeled");
      ++counts[*set[i].label];
    }
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [label, count] : counts) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    labels.push_back(best);
    if (purity) {
      purity->push_back(group.empty() ? 0.0
                                      : static_cast<double>(best_count) /
                                            static_cast<double>(group.size()));
    }
  }
  return labels;
}

ClusterCountReport select_cluster_count(const RepresentationSet& set, std::size_t k_min,
                                        std::size_t k_max, std::uint64_t seed,
                                        const KMeansOptions& options) {
  if (!set.fully_labeled()) throw InvalidArgument("cluster-count selection needs a labeled set");
  if (k_min == 0 || k_min > k_max) throw InvalidArgument("invalid cluster-count range");
  if (k_max > set.size()) {
    throw InvalidArgument("cluster count " + std::to_string(k_max) + " exceeds item count " +
                          std::to_string(set.size()));
  }
  std::vector<std::string> truth;
  for (const Item& item : set.items()) truth.push_back(*item.label);

  ClusterCountReport report;
  double best_f1 = -1.0;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const ClusteringResult result = cluster(set, k, seed, options);
    ClusterCountCandidate candidate;
    candidate.k = k;
    const auto labels = majority_labels(result, set, &candidate.purity);
    std::vector<std::string> predicted;
    for (std::size_t a : result.assignments) predicted.push_back(labels[a]);
    candidate.metrics = compute_metrics(truth, predicted);
    if (candidate.metrics.macro_f1 > best_f1) {
      best_f1 = candidate.metrics.macro_f1;
      report.chosen = k;
    }
    report.candidates.push_back(std::move(candidate));
  }
  return report;
}

}  // namespace prototrace
