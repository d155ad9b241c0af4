#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prototrace/dataio.hpp"
#include "prototrace/metrics.hpp"

namespace prototrace {

/// Outcome of one k-means run.
///
/// `assignments[i]` is the cluster of `set[i]` for the set the result was
/// computed on; `ids[i]` records that item's id so the mapping survives
/// serialization. `inertia_history` holds the objective after every mean
/// update, in iteration order.
struct ClusteringResult {
  std::vector<Vector> means;
  std::vector<std::string> ids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;

  std::size_t cluster_count() const { return means.size(); }
  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means[0].size()); }

  /// Member indices of each cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const;

  /// Throws when the structural invariants do not hold for `set`.
  void validate(const RepresentationSet& set) const;
};

struct KMeansOptions {
  double tol = 1e-6;
  std::size_t max_iter = 300;
  std::size_t restarts = 10;
};

/// k-means++ seeding; returns the chosen item indices in draw order.
std::vector<std::size_t> kmeanspp_seed_indices(const RepresentationSet& set, std::size_t k,
                                               std::uint64_t seed);
/// k-means++ seeding; returns the chosen item vectors in draw order.
std::vector<Vector> kmeanspp_seed(const RepresentationSet& set, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from the given initial means.
ClusteringResult lloyd(const RepresentationSet& set, const std::vector<Vector>& init, double tol,
                       std::size_t max_iter);

/// Best of `restarts` seeded k-means++ + Lloyd runs (seeds seed, seed+1, ...).
ClusteringResult cluster(const RepresentationSet& set, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options = {});

/// Sum of squared distances of every item to the mean of its cluster.
double inertia_of(const RepresentationSet& set, const std::vector<std::size_t>& assignments,
                  const std::vector<Vector>& means);

struct ClusterCountCandidate {
  std::size_t k = 0;
  std::vector<double> purity;
  Metrics metrics;
};

struct ClusterCountReport {
  std::vector<ClusterCountCandidate> candidates;
  std::size_t chosen = 0;
};

/// Label of each cluster by member majority; ties go to the smallest label.
std::vector<std::string> majority_labels(const ClusteringResult& result,
                                         const RepresentationSet& set,
                                         std::vector<double>* purity = nullptr);

/// Clusters a labeled set for every k in [k_min, k_max] and keeps the k whose
/// majority-labeled clustering has the highest macro-F1 (ties: smaller k).
ClusterCountReport select_cluster_count(const RepresentationSet& set, std::size_t k_min,
                                        std::size_t k_max, std::uint64_t seed,
                                        const KMeansOptions& options = {});

}  // namespace prototrace
