#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmal/numerics/matrix.hpp"

namespace mmal::numerics {

/// A trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recording of matrix operations. Nodes are appended in
/// evaluation order, so a reverse sweep over the node list is a valid
/// topological order for backpropagation.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to `p`; backward() adds this node's gradient into p.grad.
  Var parameter(Parameter& p);

  /// Record an op result. `parents` determines whether the node needs a gradient.
  Var record(Matrix value, std::span<const std::size_t> parents, BackwardFn backward);

  /// Backpropagate from a 1x1 node and flush parameter gradients.
  void backward(Var loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated on first access.
  Matrix& grad(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// Differentiable ops. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
/// Add a 1xN row to every row of a (bias broadcast).
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var square(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Row-wise gather: out(r, 0) = a(r, indices[r]).
Var pick(Var a, std::span<const std::size_t> indices);
Var sum(Var a);
Var mean(Var a);

/// Mean negative log-likelihood of integer labels under row-wise softmax(logits).
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

}  // namespace mmal::numerics
