#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mmal/numerics/tape.hpp"

namespace mmal::numerics {

/// Weights of one LSTM cell. Gate pre-activations are laid out along the
/// columns as [forget | input | output | candidate], each `hidden` wide:
///   pre = x * w_x + h_prev * w_h + bias
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(std::size_t input_dim, std::size_t hidden);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
  void initialize(std::mt19937_64& rng);

  std::size_t input_dim() const { return w_x.value.rows(); }
  std::size_t hidden() const { return w_h.value.rows(); }

  std::vector<Parameter*> parameters() { return {&w_x, &w_h, &bias}; }

  Parameter w_x;
  Parameter w_h;
  Parameter bias;
};

struct LstmVars {
  Var w_x;
  Var w_h;
  Var bias;
};

struct LstmStateVars {
  Var h;
  Var c;
};

/// Bind the layer's parameters as tape leaves.
LstmVars bind(Tape& tape, LstmLayer& layer);

/// One recorded cell step over a batch: x is (batch x input), h/c are (batch x hidden).
LstmStateVars lstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const LstmVars& params);

struct LstmCellOutput {
  Matrix h;
  Matrix c;
};

/// Non-recording evaluation of the same cell, used on inference paths.
LstmCellOutput lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                         const LstmLayer& layer);

/// Transpose a batch of (T x D) sequences into T step matrices of (batch x D).
std::vector<Matrix> batch_steps(std::span<const Matrix* const> sequences);

/// Run the cell from zero state over `steps`; returns h_t for every t.
std::vector<Var> lstm_unroll(Tape& tape, const LstmVars& params, std::span<const Matrix> steps);
std::vector<Matrix> lstm_unroll(const LstmLayer& layer, std::span<const Matrix> steps);

/// Uniform(-bound, bound) fill used for all weight matrices.
void uniform_fill(Matrix& m, double bound, std::mt19937_64& rng);

}  // namespace mmal::numerics
