#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace prototrace {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Classification quality of a labeled evaluation.
///
/// Per-class scores cover every label seen in truth or prediction; macro-F1 is
/// their unweighted mean. F1 is 0 when precision + recall is 0.
struct Metrics {
  double accuracy = 0.0;
  std::map<std::string, ClassScores> per_class;
  double macro_f1 = 0.0;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  std::size_t total = 0;
};

Metrics metrics_from_confusion(
    const std::map<std::pair<std::string, std::string>, std::size_t>& confusion);

/// `truth` and `predicted` are parallel label lists.
Metrics compute_metrics(const std::vector<std::string>& truth,
                        const std::vector<std::string>& predicted);

}  // namespace prototrace
