#include "mmal/models/qnetwork.hpp"

#include <algorithm>
#include <cmath>

#include "mmal/errors.hpp"
#include "mmal/numerics/functions.hpp"

namespace mmal::models {

using numerics::Tape;
using numerics::Var;

QNetwork::QNetwork(QNetworkConfig config, numerics::AdamConfig adam, std::mt19937_64& rng)
    : lstm(config.input_dim, config.hidden),
      head_w("q.w_l", Matrix(config.hidden, kNumActions)),
      head_b("q.b_l", Matrix(1, kNumActions)),
      config_(config),
      adam_(adam) {
  require(config.steps > 0, "QNetwork: steps must be positive");
  lstm.initialize(rng);
  numerics::uniform_fill(head_w.value, 1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
}

void QNetwork::check_batch(std::span<const Matrix* const> states) const {
  require(!states.empty(), "qnetwork: empty batch");
  for (const Matrix* s : states) {
    if (!(s != nullptr && s->rows() == config_.steps && s->cols() == config_.input_dim))
      throw ContractError("qnetwork: expected a " + std::to_string(config_.steps) + "x" +
                          std::to_string(config_.input_dim) + " state, got " +
                          (s ? s->shape_string() : std::string("null")));
  }
}

Var QNetwork::scores(Tape& tape, std::span<const Matrix* const> states) {
  check_batch(states);
  const auto params = numerics::bind(tape, lstm);
  const auto steps = numerics::batch_steps(states);
  const auto hs = numerics::lstm_unroll(tape, params, steps);
  const Var hidden = numerics::relu(hs.back());
  return numerics::add_row(numerics::matmul(hidden, tape.parameter(head_w)),
                           tape.parameter(head_b));
}

std::vector<ActionScores> QNetwork::forward_batch(std::span<const Matrix* const> states) const {
  check_batch(states);
  const auto steps = numerics::batch_steps(states);
  Matrix hidden = numerics::lstm_unroll(lstm, steps).back();
  for (double& v : hidden.values()) v = std::max(0.0, v);
  const Matrix q = numerics::matmul(hidden, head_w.value);
  std::vector<ActionScores> out(states.size());
  for (std::size_t r = 0; r < states.size(); ++r)
    for (std::size_t a = 0; a < kNumActions; ++a) out[r][a] = q(r, a) + head_b.value[a];
  return out;
}

ActionScores QNetwork::forward(const Matrix& state) const {
  const Matrix* one[] = {&state};
  return forward_batch(one).front();
}

std::vector<Parameter*> QNetwork::parameters() {
  return {&lstm.w_x, &lstm.w_h, &lstm.bias, &head_w, &head_b};
}

std::vector<const Parameter*> QNetwork::parameters() const {
  return {&lstm.w_x, &lstm.w_h, &lstm.bias, &head_w, &head_b};
}

Action greedy_action(const ActionScores& scores) {
  return static_cast<Action>(numerics::argmax(scores));
}

std::array<double, kNumActions> action_probabilities(const ActionScores& scores) {
  const auto p = numerics::softmax(scores);
  return {p[0], p[1]};
}

}  // namespace mmal::models
