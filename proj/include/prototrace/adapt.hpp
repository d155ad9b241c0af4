#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "prototrace/dataio.hpp"
#include "prototrace/net.hpp"

namespace prototrace {

enum class Kernel { Linear, Rbf };

std::string to_string(Kernel kernel);
Kernel parse_kernel(const std::string& name);

/// Median of the positive pairwise distances over the rows of X and Y
/// together; 1 when every distance is zero.
double median_bandwidth(const Matrix& x, const Matrix& y);

/// Biased squared MMD between the row samples of X and Y. The RBF kernel is
/// exp(-|a - b|^2 / (2 sigma^2)); sigma defaults to the median heuristic.
double mmd2(const Matrix& x, const Matrix& y, Kernel kernel,
            std::optional<double> bandwidth = std::nullopt);

/// |Cov(X) - Cov(Y)|_F^2 / (4 d^2) with unbiased sample covariances.
double coral(const Matrix& x, const Matrix& y);

/// probabilities[t][h] is head h's class distribution for target sample t.
/// Mean over samples of the mean pairwise L1 distance between heads.
double class_discrepancy(const std::vector<std::vector<Vector>>& probabilities);

struct DiscrepancyReport {
  double mmd2 = 0.0;
  double coral = 0.0;
  Kernel kernel = Kernel::Rbf;
  std::optional<double> bandwidth;  // resolved sigma, rbf only
};

DiscrepancyReport discrepancy(const Matrix& x, const Matrix& y, Kernel kernel,
                              std::optional<double> bandwidth = std::nullopt);

/// Row-wise gradients of mmd2 and coral. The RBF bandwidth is resolved once
/// from the inputs (or taken as given) and held fixed.
struct DiscrepancyGradients {
  Matrix mmd2_x, mmd2_y;
  Matrix coral_x, coral_y;
  double bandwidth = 1.0;
};

DiscrepancyGradients discrepancy_gradients(const Matrix& x, const Matrix& y, Kernel kernel,
                                           std::optional<double> bandwidth = std::nullopt);

/// Shared rectified extractor with one softmax head per source.
struct DAModel {
  FeedforwardNetwork extractor;
  std::vector<FeedforwardNetwork> heads;
  std::vector<std::string> sources;
  double lambda_feat = 1.0;
  double lambda_class = 0.1;
  Kernel kernel = Kernel::Rbf;
  std::optional<double> bandwidth;

  const std::vector<std::string>& classes() const { return heads.front().classes; }
  std::size_t input_dim() const { return extractor.input_dim(); }
  void validate() const;

  friend bool operator==(const DAModel&, const DAModel&) = default;
};

struct DAConfig {
  double lambda_feat = 1.0;
  double lambda_class = 0.1;
  Kernel kernel = Kernel::Rbf;
  std::optional<double> bandwidth;
  /// Extractor widths after the input; the last one is the feature width.
  std::vector<std::size_t> extractor_hidden{32};
  /// Hidden widths inside each head (empty: a single softmax layer).
  std::vector<std::size_t> head_hidden{};
  TrainConfig train;

  void validate() const;
};

struct DALossBreakdown {
  std::size_t epoch = 0;
  double classification = 0.0;
  double feature_discrepancy = 0.0;
  double class_discrepancy = 0.0;
  double total = 0.0;
  double lambda_feat = 0.0;
  double lambda_class = 0.0;
};

struct DATrainResult {
  DAModel model;
  std::vector<DALossBreakdown> history;
};

/// Builds the extractor and heads from one Glorot stream seeded with
/// config.train.seed: extractor layers first, then each head in order.
DAModel init_da_model(std::size_t input_dim, const std::vector<std::string>& classes,
                      const std::vector<std::string>& sources, const DAConfig& config);

/// Joint mini-batch SGD on classification + feature + class discrepancy.
/// `sources[i]` is labeled and tagged `source_tags[i]`; target labels are
/// never used. History entries are full-set, inference-mode objectives
/// recorded after each epoch.
DATrainResult da_train(const std::vector<RepresentationSet>& sources,
                       const std::vector<std::string>& source_tags,
                       const RepresentationSet& target, const DAConfig& config);

/// Objective terms of `model` on full sets, without dropout.
DALossBreakdown da_objective(const DAModel& model, const std::vector<RepresentationSet>& sources,
                             const RepresentationSet& target);

struct DAPrediction {
  std::string label;
  std::vector<Vector> per_head;
  Vector averaged;
};

/// Label is argmax of the mean head distribution; ties go to the smaller class.
DAPrediction da_predict(const DAModel& model, const Vector& x);

/// Fraction of labeled items whose da_predict label matches.
double da_accuracy(const DAModel& model, const RepresentationSet& set);

}  // namespace prototrace
