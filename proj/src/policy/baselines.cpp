#include "mmal/policy/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mmal/errors.hpp"

namespace mmal::policy {

double uncertainty_score(const fusion::EnsembleOutput& outputs) {
  double total = 0.0;
  for (const auto& p : outputs.probabilities) total += fusion::entropy(p);
  return total;
}

BaselineSelector::BaselineSelector(Kind kind, std::size_t budget, std::size_t stream_length)
    : kind_(kind), budget_(budget), stream_length_(stream_length) {
  if (stream_length_ > 0)
    p_ask_ = std::min(1.0, static_cast<double>(budget_) / static_cast<double>(stream_length_));
}

BaselineSelector BaselineSelector::random_with_probability(double p_ask, std::size_t budget,
                                                           std::size_t stream_length) {
  BaselineSelector s(Kind::kRandom, budget, stream_length);
  s.p_ask_ = std::clamp(p_ask, 0.0, 1.0);
  return s;
}

models::Action BaselineSelector::decide(const fusion::EnsembleOutput& outputs, std::mt19937_64& rng) {
  models::Action action = models::Action::kNoAsk;
  if (kind_ == Kind::kRandom) {
    std::bernoulli_distribution coin(p_ask_);
    action = coin(rng) ? models::Action::kAsk : models::Action::kNoAsk;
  } else {
    action = decide_uncertainty(uncertainty_score(outputs));
  }
  ++seen_;
  if (action == models::Action::kAsk) ++asked_;
  return action;
}

models::Action BaselineSelector::decide_uncertainty(double score) {
  sorted_scores_.insert(std::upper_bound(sorted_scores_.begin(), sorted_scores_.end(), score), score);
  if (asked_ >= budget_ || score <= 0.0) return models::Action::kNoAsk;
  const std::size_t remaining_samples = stream_length_ > seen_ ? stream_length_ - seen_ : 1;
  const double level =
      1.0 - static_cast<double>(budget_ - asked_) / static_cast<double>(remaining_samples);
  if (level <= 0.0) return models::Action::kAsk;
  // Smallest observed score with at least `level` of the observations at or below it.
  const double n = static_cast<double>(sorted_scores_.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(level * n)));
  const double threshold = sorted_scores_[std::min(rank, sorted_scores_.size()) - 1];
  return score >= threshold ? models::Action::kAsk : models::Action::kNoAsk;
}

}  // namespace mmal::policy
