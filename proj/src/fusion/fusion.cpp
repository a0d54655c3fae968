#include "mmal/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmal/errors.hpp"
#include "mmal/numerics/functions.hpp"

namespace mmal::fusion {

EnsembleOutput make_output(std::vector<std::vector<double>> probabilities) {
  EnsembleOutput out;
  out.probabilities = std::move(probabilities);
  for (const auto& p : out.probabilities) {
    out.predictions.push_back(numerics::argmax(p));
    out.confidences.push_back(confidence(p));
  }
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double confidence(std::span<const double> p) {
  require(p.size() > 1, "confidence: need at least two classes");
  const double c = 1.0 - entropy(p) / std::log(static_cast<double>(p.size()));
  return std::clamp(c, 0.0, 1.0);
}

std::size_t majority_vote(const EnsembleOutput& outputs) {
  require(outputs.size() > 0 && outputs.predictions.size() == outputs.size() &&
              outputs.confidences.size() == outputs.size(),
          "majority_vote: need at least one complete member output");
  const std::size_t num_classes = outputs.probabilities.front().size();
  std::vector<std::size_t> votes(num_classes, 0);
  for (std::size_t cls : outputs.predictions) {
    require(cls < num_classes, "majority_vote: prediction out of range");
    ++votes[cls];
  }
  const std::size_t top = *std::max_element(votes.begin(), votes.end());
  if (std::count(votes.begin(), votes.end(), top) == 1)
    return static_cast<std::size_t>(std::find(votes.begin(), votes.end(), top) - votes.begin());

  std::size_t best_class = num_classes;
  double best_confidence = -1.0;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    const std::size_t cls = outputs.predictions[m];
    if (votes[cls] != top) continue;
    const double c = outputs.confidences[m];
    if (c > best_confidence || (c == best_confidence && cls < best_class)) {
      best_confidence = c;
      best_class = cls;
    }
  }
  return best_class;
}

Matrix feature_concat(const data::MultiModalWindow& window, std::span<const std::size_t> modalities) {
  require(!modalities.empty(), "feature_concat: no modalities selected");
  std::vector<Matrix> parts;
  parts.reserve(modalities.size());
  for (std::size_t m : modalities) {
    if (!(m < window.modalities.size()))
      throw ContractError("feature_concat: window is missing modality " + std::to_string(m));
    parts.push_back(window.modalities[m]);
  }
  return numerics::hconcat(parts);
}

Matrix feature_concat(const data::MultiModalWindow& window) {
  std::vector<std::size_t> all(window.modalities.size());
  std::iota(all.begin(), all.end(), 0);
  return feature_concat(window, all);
}

}  // namespace mmal::fusion
