#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmal/data/window.hpp"

namespace mmal::fusion {

using numerics::Matrix;

/// Per-member classifier outputs for one window.
struct EnsembleOutput {
  std::vector<std::vector<double>> probabilities;
  std::vector<std::size_t> predictions;
  std::vector<double> confidences;

  std::size_t size() const { return probabilities.size(); }
};

/// Fill predictions (argmax, low index on ties) and confidences from probabilities.
EnsembleOutput make_output(std::vector<std::vector<double>> probabilities);

/// Shannon entropy with natural log; 0 log 0 = 0.
double entropy(std::span<const double> p);

/// 1 - H(p) / ln K, clamped to [0, 1].
double confidence(std::span<const double> p);

/// Majority vote over member predictions. A tie between top classes goes to
/// the most confident member backing one of the tied classes; a tie in
/// confidence as well goes to the lowest class index.
std::size_t majority_vote(const EnsembleOutput& outputs);

/// Per-step concatenation of all modalities in schema order.
Matrix feature_concat(const data::MultiModalWindow& window);
/// Per-step concatenation of the listed modalities, in the listed order.
Matrix feature_concat(const data::MultiModalWindow& window, std::span<const std::size_t> modalities);

}  // namespace mmal::fusion
