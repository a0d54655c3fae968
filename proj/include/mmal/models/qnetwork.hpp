#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mmal/numerics/adam.hpp"
#include "mmal/numerics/lstm.hpp"

namespace mmal::models {

using numerics::Matrix;
using numerics::Parameter;

/// Action indices of the query policy.
enum class Action : std::size_t { kNoAsk = 0, kAsk = 1 };
inline constexpr std::size_t kNumActions = 2;

struct QNetworkConfig {
  std::size_t input_dim = 16;
  /// Sequence length of one state (1 for classifier-output states, T for raw features).
  std::size_t steps = 1;
  std::size_t hidden = 32;

  friend bool operator==(const QNetworkConfig&, const QNetworkConfig&) = default;
};

using ActionScores = std::array<double, kNumActions>;

/// Action-value network: LSTM(32) -> ReLU -> linear {W_l, b_l} -> one score per action.
/// The recurrent state starts from zero for every evaluated state.
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(QNetworkConfig config, numerics::AdamConfig adam, std::mt19937_64& rng);

  const QNetworkConfig& config() const { return config_; }

  /// Recorded scores for a batch of (steps x input_dim) states: (batch x 2).
  numerics::Var scores(numerics::Tape& tape, std::span<const Matrix* const> states);

  ActionScores forward(const Matrix& state) const;
  std::vector<ActionScores> forward_batch(std::span<const Matrix* const> states) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  numerics::AdamState& optimizer() { return adam_; }
  const numerics::AdamState& optimizer() const { return adam_; }

  numerics::LstmLayer lstm;
  Parameter head_w;
  Parameter head_b;

 private:
  void check_batch(std::span<const Matrix* const> states) const;

  QNetworkConfig config_;
  numerics::AdamState adam_;
};

/// Greedy action; equal scores resolve to kNoAsk.
Action greedy_action(const ActionScores& scores);

/// Softmax view of the scores (sums to one).
std::array<double, kNumActions> action_probabilities(const ActionScores& scores);

}  // namespace mmal::models
