#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "mmal/data/window.hpp"

namespace mmal::personalize {

using Confusion = std::array<std::array<std::size_t, data::kNumClasses>, data::kNumClasses>;

/// Percent-scale classification metrics.
struct Metrics {
  double accuracy = 0.0;
  /// Unweighted mean of per-class F1 over classes occurring in the labels or
  /// the predictions; classes absent from both are skipped.
  double macro_f1 = 0.0;
  /// confusion[truth][predicted]
  Confusion confusion{};
  std::size_t count = 0;
};

/// Throws ContractError for empty or mismatched inputs or labels outside {0,1,2}.
Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

}  // namespace mmal::personalize
