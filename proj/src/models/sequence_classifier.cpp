#include "mmal/models/sequence_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmal/errors.hpp"
#include "mmal/numerics/functions.hpp"

namespace mmal::models {

using numerics::Tape;
using numerics::Var;

SequenceClassifier::SequenceClassifier(ClassifierConfig config, numerics::AdamConfig adam,
                                       std::mt19937_64& rng)
    : lstm(config.input_dim, config.hidden),
      head_w("fcl.w", Matrix(config.hidden, config.num_classes)),
      head_b("fcl.b", Matrix(1, config.num_classes)),
      config_(config),
      adam_(adam) {
  require(config.steps > 0 && config.num_classes > 1, "SequenceClassifier: invalid config");
  lstm.initialize(rng);
  numerics::uniform_fill(head_w.value, 1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
}

void SequenceClassifier::check_batch(std::span<const Matrix* const> batch) const {
  require(!batch.empty(), "classifier: empty batch");
  for (const Matrix* x : batch) {
    if (!(x != nullptr && x->rows() == config_.steps && x->cols() == config_.input_dim))
      throw ContractError("classifier: expected a " + std::to_string(config_.steps) + "x" +
                          std::to_string(config_.input_dim) + " sequence, got " +
                          (x ? x->shape_string() : std::string("null")));
  }
}

Var SequenceClassifier::scores(Tape& tape, std::span<const Matrix* const> batch) {
  check_batch(batch);
  const auto params = numerics::bind(tape, lstm);
  const Var w = tape.parameter(head_w);
  const Var b = tape.parameter(head_b);
  const auto steps = numerics::batch_steps(batch);
  const auto hs = numerics::lstm_unroll(tape, params, steps);
  Var total = numerics::relu(numerics::add_row(numerics::matmul(hs.front(), w), b));
  for (std::size_t t = 1; t < hs.size(); ++t)
    total = numerics::add(total, numerics::relu(numerics::add_row(numerics::matmul(hs[t], w), b)));
  Var averaged = numerics::scale(total, 1.0 / static_cast<double>(hs.size()));
  return config_.sigmoid_head ? numerics::sigmoid(averaged) : averaged;
}

Var SequenceClassifier::loss(Tape& tape, std::span<const Matrix* const> batch,
                             std::span<const std::size_t> labels) {
  require(labels.size() == batch.size(), "classifier loss: one label per sequence required");
  for (std::size_t y : labels) require(y < config_.num_classes, "classifier loss: label out of range");
  return numerics::softmax_cross_entropy(scores(tape, batch), labels);
}

std::vector<ClassifierPrediction> SequenceClassifier::predict_batch(
    std::span<const Matrix* const> batch) const {
  check_batch(batch);
  const auto steps = numerics::batch_steps(batch);
  const auto hs = numerics::lstm_unroll(lstm, steps);
  const std::size_t k = config_.num_classes;
  Matrix averaged(batch.size(), k);
  for (const Matrix& h : hs) {
    Matrix z = numerics::matmul(h, head_w.value);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t j = 0; j < k; ++j) averaged(r, j) += std::max(0.0, z(r, j) + head_b.value[j]);
  }
  std::vector<ClassifierPrediction> out(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) row[j] = averaged(r, j) / static_cast<double>(hs.size());
    if (config_.sigmoid_head) row = numerics::sigmoid(row);
    out[r].probabilities = numerics::softmax(row);
    out[r].label = numerics::argmax(out[r].probabilities);
  }
  return out;
}

ClassifierPrediction SequenceClassifier::predict(const Matrix& sequence) const {
  const Matrix* one[] = {&sequence};
  return predict_batch(one).front();
}

TrainSummary SequenceClassifier::train(std::span<const Matrix* const> inputs,
                                       std::span<const std::size_t> labels,
                                       const ClassifierTrainOptions& options,
                                       std::mt19937_64& rng) {
  require(inputs.size() == labels.size(), "classifier train: inputs and labels differ in length");
  TrainSummary summary;
  if (inputs.empty() || options.epochs == 0) return summary;
  check_batch(inputs);
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  auto params = parameters();
  std::vector<const Matrix*> xb;
  std::vector<std::size_t> yb;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      xb.clear();
      yb.clear();
      for (std::size_t i = start; i < end; ++i) {
        xb.push_back(inputs[order[i]]);
        yb.push_back(labels[order[i]]);
      }
      Tape tape;
      numerics::zero_grad(params);
      const Var l = loss(tape, xb, yb);
      tape.backward(l);
      adam_.update(params);
      epoch_loss += l.value()[0];
      ++batches;
      ++summary.optimizer_steps;
    }
    summary.final_loss = epoch_loss / static_cast<double>(batches);
  }
  summary.trained = true;
  return summary;
}

std::vector<Parameter*> SequenceClassifier::parameters() {
  return {&lstm.w_x, &lstm.w_h, &lstm.bias, &head_w, &head_b};
}

std::vector<const Parameter*> SequenceClassifier::parameters() const {
  return {&lstm.w_x, &lstm.w_h, &lstm.bias, &head_w, &head_b};
}

}  // namespace mmal::models
