#include "mmal/numerics/matrix.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "mmal/errors.hpp"

namespace mmal::numerics {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
  return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (!(data_.size() == rows * cols))
    throw ContractError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::initializer_list<double> values) {
  return Matrix(1, values.size(), std::vector<double>(values));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void matmul_accumulate(Matrix& c, const Matrix& a, const Matrix& b, bool transpose_a,
                       bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t k = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != kb)
    throw ContractError("matmul: inner dimensions differ (" + a.shape_string() + " * " + b.shape_string() +
                        ")");
  if (!(c.rows() == m && c.cols() == n))
    throw ContractError("matmul: output has shape " + c.shape_string());
  if (m == 0 || n == 0 || k == 0) return;
  auto out = view(c);
  const auto lhs = view(a);
  const auto rhs = view(b);
  if (!transpose_a && !transpose_b) {
    out.noalias() += lhs * rhs;
  } else if (transpose_a && !transpose_b) {
    out.noalias() += lhs.transpose() * rhs;
  } else if (!transpose_a && transpose_b) {
    out.noalias() += lhs * rhs.transpose();
  } else {
    out.noalias() += lhs.transpose() * rhs.transpose();
  }
}

Matrix matmul(const Matrix& a, const Matrix& b, bool transpose_a, bool transpose_b) {
  Matrix c(transpose_a ? a.cols() : a.rows(), transpose_b ? b.rows() : b.cols());
  matmul_accumulate(c, a, b, transpose_a, transpose_b);
  return c;
}

Matrix hconcat(std::span<const Matrix> parts) {
  require(!parts.empty(), "hconcat: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "hconcat: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * cols;
    for (const auto& p : parts) {
      const auto src = p.row_span(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

}  // namespace mmal::numerics
