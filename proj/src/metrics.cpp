#include "prototrace/metrics.hpp"

#include <set>

#include "prototrace/error.hpp"

namespace prototrace {

Metrics metrics_from_confusion(
    const std::map<std::pair<std::string, std::string>, std::size_t>& confusion) {
  Metrics m;
  m.confusion = confusion;
  std::set<std::string> labels;
  std::map<std::string, std::size_t> true_count, predicted_count, hits;
  std::size_t correct = 0;
  for (const auto& [cell, count] : confusion) {
    const auto& [truth, predicted] = cell;
    labels.insert(truth);
    labels.insert(predicted);
    m.total += count;
    true_count[truth] += count;
    predicted_count[predicted] += count;
    if (truth == predicted) {
      hits[truth] += count;
      correct += count;
    }
  }
  if (m.total == 0) return m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);

  double f1_sum = 0.0;
  std::size_t present = 0;
  for (const std::string& label : labels) {
    if (true_count[label] == 0 && predicted_count[label] == 0) continue;
    ClassScores s;
    const double tp = static_cast<double>(hits[label]);
    if (predicted_count[label] > 0) s.precision = tp / static_cast<double>(predicted_count[label]);
    if (true_count[label] > 0) s.recall = tp / static_cast<double>(true_count[label]);
    if (s.precision + s.recall > 0.0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    m.per_class[label] = s;
    f1_sum += s.f1;
    ++present;
  }
  m.macro_f1 = present > 0 ? f1_sum / static_cast<double>(present) : 0.0;
  return m;
}

Metrics compute_metrics(const std::vector<std::string>& truth,
                        const std::vector<std::string>& predicted) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument("truth and prediction lists differ in length");
  }
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) ++confusion[{truth[i], predicted[i]}];
  return metrics_from_confusion(confusion);
}

}  // namespace prototrace
