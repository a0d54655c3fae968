#include "mmal/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "mmal/errors.hpp"

namespace mmal::data {

Normalization fit_zscore(std::span<const SubjectSession> train) {
  const MultiModalWindow* first = nullptr;
  for (const auto& s : train)
    if (!s.windows.empty()) {
      first = &s.windows.front();
      break;
    }
  require(first != nullptr, "zscore: no training windows");

  Normalization norm;
  for (const auto& m : first->modalities) {
    norm.mean.emplace_back(m.cols(), 0.0);
    norm.stddev.emplace_back(m.cols(), 0.0);
  }
  // Two passes keep the variance accurate for large offsets.
  double count = 0;
  for (const auto& s : train)
    for (const auto& w : s.windows) {
      require(w.modalities.size() == norm.mean.size(), "zscore: inconsistent modality count");
      for (std::size_t m = 0; m < w.modalities.size(); ++m) {
        const Matrix& x = w.modalities[m];
        require(x.cols() == norm.mean[m].size(), "zscore: inconsistent feature width");
        for (std::size_t t = 0; t < x.rows(); ++t)
          for (std::size_t d = 0; d < x.cols(); ++d) norm.mean[m][d] += x(t, d);
      }
      count += static_cast<double>(w.steps());
    }
  for (auto& mu : norm.mean)
    for (double& v : mu) v /= count;
  for (const auto& s : train)
    for (const auto& w : s.windows)
      for (std::size_t m = 0; m < w.modalities.size(); ++m) {
        const Matrix& x = w.modalities[m];
        for (std::size_t t = 0; t < x.rows(); ++t)
          for (std::size_t d = 0; d < x.cols(); ++d) {
            const double diff = x(t, d) - norm.mean[m][d];
            norm.stddev[m][d] += diff * diff;
          }
      }
  for (auto& sd : norm.stddev)
    for (double& v : sd) v = std::max(std::sqrt(v / count), kStdFloor);
  return norm;
}

void apply_zscore(const Normalization& norm, SubjectSession& session) {
  for (auto& w : session.windows) {
    require(w.modalities.size() == norm.mean.size(), "zscore: inconsistent modality count");
    for (std::size_t m = 0; m < w.modalities.size(); ++m) {
      Matrix& x = w.modalities[m];
      require(x.cols() == norm.mean[m].size(), "zscore: inconsistent feature width");
      for (std::size_t t = 0; t < x.rows(); ++t)
        for (std::size_t d = 0; d < x.cols(); ++d)
          x(t, d) = (x(t, d) - norm.mean[m][d]) / norm.stddev[m][d];
    }
  }
}

Normalization zscore_fit_apply(Dataset& dataset) {
  const Normalization norm = fit_zscore(dataset.train);
  for (auto& s : dataset.train) apply_zscore(norm, s);
  for (auto& s : dataset.test) apply_zscore(norm, s);
  return norm;
}

Label discretize_engagement(double score) {
  if (!(score >= -1.0 && score <= 1.0))
    throw ContractError("discretize_engagement: score " + std::to_string(score) + " outside [-1, 1]");
  if (score <= 0.5) return 0;
  if (score <= 0.8) return 1;
  return 2;
}

std::vector<Label> discretize_engagement(std::span<const double> scores) {
  std::vector<Label> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(discretize_engagement(s));
  return out;
}

}  // namespace mmal::data
