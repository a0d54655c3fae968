#include "mmal/personalize/metrics.hpp"

#include "mmal/errors.hpp"

namespace mmal::personalize {

Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  require(!labels.empty(), "compute_metrics: empty input");
  require(predictions.size() == labels.size(), "compute_metrics: length mismatch");
  constexpr std::size_t K = data::kNumClasses;
  Metrics m;
  m.count = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < K && predictions[i] < K, "compute_metrics: class out of range");
    ++m.confusion[labels[i]][predictions[i]];
    if (labels[i] == predictions[i]) ++correct;
  }
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(m.count);

  double f1_sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const std::size_t tp = m.confusion[c][c];
    std::size_t fn = 0;
    std::size_t fp = 0;
    for (std::size_t o = 0; o < K; ++o) {
      if (o == c) continue;
      fn += m.confusion[c][o];
      fp += m.confusion[o][c];
    }
    if (tp + fn + fp == 0) continue;
    f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++classes;
  }
  m.macro_f1 = 100.0 * f1_sum / static_cast<double>(classes);
  return m;
}

}  // namespace mmal::personalize
