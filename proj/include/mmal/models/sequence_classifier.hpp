#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mmal/numerics/adam.hpp"
#include "mmal/numerics/lstm.hpp"

namespace mmal::models {

using numerics::Matrix;
using numerics::Parameter;

struct ClassifierConfig {
  std::size_t input_dim = 0;
  std::size_t steps = 10;
  std::size_t hidden = 64;
  std::size_t num_classes = 3;
  /// Squash the averaged fcL output with a sigmoid before the softmax.
  bool sigmoid_head = true;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

struct ClassifierTrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
};

struct ClassifierPrediction {
  std::vector<double> probabilities;
  std::size_t label = 0;
};

struct TrainSummary {
  bool trained = false;
  /// Mean cross-entropy over the mini-batches of the last epoch.
  double final_loss = 0.0;
  std::size_t optimizer_steps = 0;
};

/// LSTM engagement classifier for one input stream:
/// unroll over T steps, apply the shared fcL + ReLU to every h_t, average
/// over time, squash with a sigmoid and normalise with a softmax.
class SequenceClassifier {
 public:
  SequenceClassifier() = default;
  SequenceClassifier(ClassifierConfig config, numerics::AdamConfig adam, std::mt19937_64& rng);

  const ClassifierConfig& config() const { return config_; }

  /// Recorded pre-softmax scores, (batch x num_classes).
  numerics::Var scores(numerics::Tape& tape, std::span<const Matrix* const> batch);
  /// Recorded mean cross-entropy against integer labels.
  numerics::Var loss(numerics::Tape& tape, std::span<const Matrix* const> batch,
                     std::span<const std::size_t> labels);

  ClassifierPrediction predict(const Matrix& sequence) const;
  std::vector<ClassifierPrediction> predict_batch(std::span<const Matrix* const> batch) const;

  /// Mini-batch Adam on cross-entropy. Returns trained=false for an empty pool
  /// or zero epochs, in which case parameters are untouched.
  TrainSummary train(std::span<const Matrix* const> inputs, std::span<const std::size_t> labels,
                     const ClassifierTrainOptions& options, std::mt19937_64& rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  numerics::AdamState& optimizer() { return adam_; }
  const numerics::AdamState& optimizer() const { return adam_; }
  /// Drop accumulated moments, keeping the optimizer configuration.
  void reset_optimizer() { adam_ = numerics::AdamState(adam_.config()); }

  numerics::LstmLayer lstm;
  Parameter head_w;
  Parameter head_b;

 private:
  void check_batch(std::span<const Matrix* const> batch) const;

  ClassifierConfig config_;
  numerics::AdamState adam_;
};

}  // namespace mmal::models
