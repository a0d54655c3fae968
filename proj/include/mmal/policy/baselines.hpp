#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mmal/fusion/fusion.hpp"
#include "mmal/models/qnetwork.hpp"

namespace mmal::policy {

/// Sum of the members' natural-log entropies.
double uncertainty_score(const fusion::EnsembleOutput& outputs);

/// Heuristic query strategies sharing the learned policy's budget.
class BaselineSelector {
 public:
  enum class Kind { kRandom, kUncertainty };

  /// RND asks with p = budget / stream_length. UNC asks when the score
  /// reaches the running (1 - remaining_budget / remaining_samples)
  /// quantile of the scores seen so far in this stream.
  BaselineSelector(Kind kind, std::size_t budget, std::size_t stream_length);
  /// RND with an explicit query probability (clamped to [0, 1]).
  static BaselineSelector random_with_probability(double p_ask, std::size_t budget,
                                                  std::size_t stream_length);

  models::Action decide(const fusion::EnsembleOutput& outputs, std::mt19937_64& rng);

  Kind kind() const { return kind_; }
  double ask_probability() const { return p_ask_; }
  std::size_t asked() const { return asked_; }
  std::size_t seen() const { return seen_; }

 private:
  models::Action decide_uncertainty(double score);

  Kind kind_;
  std::size_t budget_;
  std::size_t stream_length_;
  double p_ask_ = 0.0;
  std::size_t asked_ = 0;
  std::size_t seen_ = 0;
  std::vector<double> sorted_scores_;
};

}  // namespace mmal::policy
