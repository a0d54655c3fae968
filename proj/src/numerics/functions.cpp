#include "mmal/numerics/functions.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "mmal/errors.hpp"

namespace mmal::numerics {

std::vector<double> sigmoid(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return out;
}

namespace {

using ArrayMap = Eigen::Map<const Eigen::ArrayXd>;
using MutArrayMap = Eigen::Map<Eigen::ArrayXd>;

}  // namespace

void logistic_into(std::span<const double> x, std::span<double> out) {
  require(x.size() == out.size(), "logistic_into: length mismatch");
  const ArrayMap in(x.data(), static_cast<Eigen::Index>(x.size()));
  MutArrayMap(out.data(), static_cast<Eigen::Index>(out.size())) = (1.0 + (-in).exp()).inverse();
}

void tanh_into(std::span<const double> x, std::span<double> out) {
  require(x.size() == out.size(), "tanh_into: length mismatch");
  const ArrayMap in(x.data(), static_cast<Eigen::Index>(x.size()));
  // 1 - 2 / (e^{2x} + 1) saturates cleanly at both ends.
  MutArrayMap(out.data(), static_cast<Eigen::Index>(out.size())) = 1.0 - 2.0 * ((2.0 * in).exp() + 1.0).inverse();
}

std::vector<double> softmax(std::span<const double> z) {
  require(!z.empty(), "softmax: empty input");
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += out[i] = std::exp(z[i] - mx);
  for (double& v : out) v /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), "argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace mmal::numerics
