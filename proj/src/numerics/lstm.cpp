#include "mmal/numerics/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "mmal/errors.hpp"
#include "mmal/numerics/functions.hpp"

namespace mmal::numerics {

LstmLayer::LstmLayer(std::size_t input_dim, std::size_t hidden)
    : w_x("lstm.w_x", Matrix(input_dim, 4 * hidden)),
      w_h("lstm.w_h", Matrix(hidden, 4 * hidden)),
      bias("lstm.bias", Matrix(1, 4 * hidden)) {
  require(input_dim > 0 && hidden > 0, "LstmLayer: dimensions must be positive");
}

void uniform_fill(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : m.values()) v = dist(rng);
}

void LstmLayer::initialize(std::mt19937_64& rng) {
  uniform_fill(w_x.value, 1.0 / std::sqrt(static_cast<double>(input_dim())), rng);
  uniform_fill(w_h.value, 1.0 / std::sqrt(static_cast<double>(hidden())), rng);
  bias.value.fill(0.0);
}

LstmVars bind(Tape& tape, LstmLayer& layer) {
  return {tape.parameter(layer.w_x), tape.parameter(layer.w_h), tape.parameter(layer.bias)};
}

LstmStateVars lstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& params) {
  const std::size_t hidden = params.w_h.rows();
  if (!(x.cols() == params.w_x.rows()))
    throw ContractError("lstm_step: input width " + std::to_string(x.cols()) + " != " +
                        std::to_string(params.w_x.rows()));
  require(h_prev.cols() == hidden && c_prev.cols() == hidden,
          "lstm_step: state width does not match hidden size");
  require(h_prev.rows() == x.rows() && c_prev.rows() == x.rows(),
          "lstm_step: batch sizes differ");
  (void)tape;

  const Var pre = add_row(add(matmul(x, params.w_x), matmul(h_prev, params.w_h)), params.bias);
  const Var forget = sigmoid(slice_cols(pre, 0, hidden));
  const Var input = sigmoid(slice_cols(pre, hidden, hidden));
  const Var output = sigmoid(slice_cols(pre, 2 * hidden, hidden));
  const Var candidate = tanh(slice_cols(pre, 3 * hidden, hidden));
  const Var c = add(hadamard(forget, c_prev), hadamard(input, candidate));
  const Var h = hadamard(output, tanh(c));
  return {h, c};
}

LstmCellOutput lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                         const LstmLayer& layer) {
  const std::size_t hidden = layer.hidden();
  if (!(x.cols() == layer.input_dim()))
    throw ContractError("lstm_step: input width " + std::to_string(x.cols()) + " != " +
                        std::to_string(layer.input_dim()));
  require(h_prev.cols() == hidden && c_prev.cols() == hidden,
          "lstm_step: state width does not match hidden size");
  require(h_prev.rows() == x.rows() && c_prev.rows() == x.rows(),
          "lstm_step: batch sizes differ");

  Matrix pre = matmul(x, layer.w_x.value);
  matmul_accumulate(pre, h_prev, layer.w_h.value);
  const std::size_t width = 4 * hidden;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = pre.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) row[j] += layer.bias.value[j];
    const std::span<double> gates(row, 3 * hidden);
    logistic_into(gates, gates);
    const std::span<double> cand(row + 3 * hidden, hidden);
    tanh_into(cand, cand);
  }
  LstmCellOutput out{Matrix(x.rows(), hidden), Matrix(x.rows(), hidden)};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* g = pre.data() + r * width;
    for (std::size_t j = 0; j < hidden; ++j)
      out.c(r, j) = g[j] * c_prev(r, j) + g[hidden + j] * g[3 * hidden + j];
    tanh_into(out.c.row_span(r), out.h.row_span(r));
    for (std::size_t j = 0; j < hidden; ++j) out.h(r, j) *= g[2 * hidden + j];
  }
  return out;
}

std::vector<Matrix> batch_steps(std::span<const Matrix* const> sequences) {
  require(!sequences.empty(), "batch_steps: empty batch");
  const std::size_t steps = sequences.front()->rows();
  const std::size_t dim = sequences.front()->cols();
  std::vector<Matrix> out(steps, Matrix(sequences.size(), dim));
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const Matrix& seq = *sequences[b];
    if (!(seq.rows() == steps && seq.cols() == dim))
      throw ContractError("batch_steps: sequence " + std::to_string(b) + " has shape " + seq.shape_string() +
                          ", expected " + std::to_string(steps) + "x" + std::to_string(dim));
    for (std::size_t t = 0; t < steps; ++t) {
      const auto src = seq.row_span(t);
      std::copy(src.begin(), src.end(), out[t].data() + b * dim);
    }
  }
  return out;
}

std::vector<Var> lstm_unroll(Tape& tape, const LstmVars& params, std::span<const Matrix> steps) {
  require(!steps.empty(), "lstm_unroll: no time steps");
  const std::size_t batch = steps.front().rows();
  const std::size_t hidden = params.w_h.rows();
  Var h = tape.constant(Matrix(batch, hidden));
  Var c = tape.constant(Matrix(batch, hidden));
  std::vector<Var> outputs;
  outputs.reserve(steps.size());
  for (const Matrix& x : steps) {
    const auto next = lstm_step(tape, tape.constant(x), h, c, params);
    h = next.h;
    c = next.c;
    outputs.push_back(h);
  }
  return outputs;
}

std::vector<Matrix> lstm_unroll(const LstmLayer& layer, std::span<const Matrix> steps) {
  require(!steps.empty(), "lstm_unroll: no time steps");
  const std::size_t batch = steps.front().rows();
  LstmCellOutput state{Matrix(batch, layer.hidden()), Matrix(batch, layer.hidden())};
  std::vector<Matrix> outputs;
  outputs.reserve(steps.size());
  for (const Matrix& x : steps) {
    state = lstm_step(x, state.h, state.c, layer);
    outputs.push_back(state.h);
  }
  return outputs;
}

}  // namespace mmal::numerics
