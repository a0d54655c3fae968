#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mmal/data/generator.hpp"
#include "mmal/numerics/tape.hpp"

namespace mmal::testing {

using numerics::Matrix;
using numerics::Parameter;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = n(rng);
  return m;
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all
/// entries of `params`, using central differences of step h.
inline double max_fd_error(const std::vector<Parameter*>& params,
                           const std::function<numerics::Var(numerics::Tape&)>& build, double h = 1e-5,
                           double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    numerics::Tape tape;
    tape.backward(build(tape));
  }
  const auto loss_value = [&] {
    numerics::Tape tape;
    return build(tape).value()[0];
  };
  double worst = 0.0;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss_value();
      p->value[i] = saved - h;
      const double down = loss_value();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

/// Small heterogeneous dataset for fast end-to-end tests.
inline data::GeneratorConfig tiny_generator(std::uint64_t seed = 5) {
  data::GeneratorConfig g;
  g.train_subjects = 3;
  g.test_subjects = 2;
  g.windows_per_subject = 30;
  g.seed = seed;
  return g;
}

}  // namespace mmal::testing
