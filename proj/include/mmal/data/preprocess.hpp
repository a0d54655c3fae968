#pragma once

#include <span>
#include <vector>

#include "mmal/data/window.hpp"

namespace mmal::data {

inline constexpr double kStdFloor = 1e-8;

/// Per-feature statistics, one vector per modality.
struct Normalization {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stddev;
};

/// Mean/std over every time step of every training window. Throws
/// ContractError when no training windows are given.
Normalization fit_zscore(std::span<const SubjectSession> train);
void apply_zscore(const Normalization& norm, SubjectSession& session);

/// Fit on dataset.train, apply to train and test.
Normalization zscore_fit_apply(Dataset& dataset);

/// Bin a continuous engagement score in [-1, 1]:
/// low [-1, 0.5], medium (0.5, 0.8], high (0.8, 1].
Label discretize_engagement(double score);
std::vector<Label> discretize_engagement(std::span<const double> scores);

}  // namespace mmal::data
