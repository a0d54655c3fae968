#include "mmal/numerics/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <type_traits>

#include "mmal/errors.hpp"
#include "mmal/numerics/functions.hpp"

namespace mmal::numerics {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::span<const std::size_t> parents, BackwardFn backward) {
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [this](std::size_t id) { return nodes_[id].requires_grad; });
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{},
                        nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  require(!nodes_.empty(), "backward: nothing recorded on the tape");
  require(loss.tape == this && loss.id < nodes_.size(), "backward: loss is not on this tape");
  if (!(nodes_[loss.id].value.rows() == 1 && nodes_[loss.id].value.cols() == 1))
    throw ContractError("backward: loss must be a scalar, got " + nodes_[loss.id].value.shape_string());
  for (auto& n : nodes_) n.grad = Matrix();
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.parameter != nullptr) {
      auto& target = n.parameter->grad;
      if (!target.same_shape(n.value)) target = Matrix(n.value.rows(), n.value.cols());
      for (std::size_t k = 0; k < target.size(); ++k) target[k] += n.grad[k];
    }
  }
}

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (!(a.tape != nullptr && a.tape == b.tape))
    throw ContractError(std::string(op) + ": operands on different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
  check_same_tape(a, b, op);
  if (!(a.value().same_shape(b.value())))
    throw ContractError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                        b.value().shape_string());
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Var a, Fwd fwd, Deriv deriv_from_output) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  if constexpr (std::is_invocable_v<Fwd, std::span<const double>, std::span<double>>) {
    fwd(x.values(), y.values());
  } else {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = fwd(x[k]);
  }
  const std::array<std::size_t, 1> parents{a.id};
  return a.tape->record(std::move(y), parents, [pa = a.id, deriv_from_output](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Matrix& out = t.value(self);
    const Matrix& in = t.value(pa);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(pa);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * deriv_from_output(in[k], out[k]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  Matrix out = numerics::matmul(a.value(), b.value());
  const std::array<std::size_t, 2> parents{a.id, b.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, pb = b.id](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(pa)) matmul_accumulate(t.grad(pa), g, t.value(pb), false, true);
    if (t.requires_grad(pb)) matmul_accumulate(t.grad(pb), t.value(pa), g, true, false);
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  const std::array<std::size_t, 2> parents{a.id, b.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, pb = b.id](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t p : {pa, pb}) {
      if (!t.requires_grad(p)) continue;
      Matrix& gp = t.grad(p);
      for (std::size_t k = 0; k < g.size(); ++k) gp[k] += g[k];
    }
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const std::array<std::size_t, 2> parents{a.id, b.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, pb = b.id](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(pa)) {
      Matrix& ga = t.grad(pa);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    }
    if (t.requires_grad(pb)) {
      Matrix& gb = t.grad(pb);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var hadamard(Var a, Var b) {
  check_same_shape(a, b, "hadamard");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const std::array<std::size_t, 2> parents{a.id, b.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, pb = b.id](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(pa)) {
      Matrix& ga = t.grad(pa);
      const Matrix& vb = t.value(pb);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
    }
    if (t.requires_grad(pb)) {
      Matrix& gb = t.grad(pb);
      const Matrix& va = t.value(pa);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
    }
  });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row, "add_row");
  const Matrix& r = row.value();
  if (!(r.rows() == 1 && r.cols() == a.cols()))
    throw ContractError("add_row: row " + r.shape_string() + " does not broadcast over " +
                        a.value().shape_string());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
  const std::array<std::size_t, 2> parents{a.id, row.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, pr = row.id](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(pa)) {
      Matrix& ga = t.grad(pa);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    }
    if (t.requires_grad(pr)) {
      Matrix& gr = t.grad(pr);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var scale(Var a, double factor) {
  return unary_elementwise(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var sigmoid(Var a) {
  return unary_elementwise(a, logistic_into, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_elementwise(
      a, tanh_into, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary_elementwise(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (!(begin + count <= x.cols()))
    throw ContractError("slice_cols: range exceeds " + x.shape_string());
  Matrix out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  const std::array<std::size_t, 1> parents{a.id};
  return a.tape->record(std::move(out), parents, [pa = a.id, begin](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(pa);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  require(x.cols() > 0, "softmax_rows: empty rows");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) total += out(i, j) = std::exp(x(i, j) - mx);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= total;
  }
  const std::array<std::size_t, 1> parents{a.id};
  return a.tape->record(std::move(out), parents, [pa = a.id](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(pa);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  require(x.cols() > 0, "log_softmax_rows: empty rows");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) total += std::exp(x(i, j) - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) - lse;
  }
  const std::array<std::size_t, 1> parents{a.id};
  return a.tape->record(std::move(out), parents, [pa = a.id](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(pa);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += g(i, j) - std::exp(y(i, j)) * gsum;
    }
  });
}

Var pick(Var a, std::span<const std::size_t> indices) {
  const Matrix& x = a.value();
  require(indices.size() == x.rows(), "pick: need one index per row");
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    require(indices[i] < x.cols(), "pick: index out of range");
    out(i, 0) = x(i, indices[i]);
  }
  const std::array<std::size_t, 1> parents{a.id};
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return a.tape->record(std::move(out), parents,
                        [pa = a.id, idx = std::move(idx)](Tape& t, std::size_t self) {
                          if (!t.requires_grad(pa)) return;
                          const Matrix& g = t.grad(self);
                          Matrix& ga = t.grad(pa);
                          for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g(i, 0);
                        });
}

Var sum(Var a) {
  const Matrix& x = a.value();
  double total = 0.0;
  for (double v : x.values()) total += v;
  const std::array<std::size_t, 1> parents{a.id};
  return a.tape->record(Matrix(1, 1, total), parents, [pa = a.id](Tape& t, std::size_t self) {
    if (!t.requires_grad(pa)) return;
    const double g = t.grad(self)[0];
    Matrix& ga = t.grad(pa);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g;
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  return scale(mean(pick(log_softmax_rows(logits), labels)), -1.0);
}

}  // namespace mmal::numerics
