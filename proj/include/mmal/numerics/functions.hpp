#pragma once

#include <span>
#include <vector>

namespace mmal::numerics {

/// Elementwise logistic function 1 / (1 + e^-x), evaluated without overflow.
std::vector<double> sigmoid(std::span<const double> x);

/// Vectorised logistic and tanh, out[i] = f(x[i]); spans must have equal length.
void logistic_into(std::span<const double> x, std::span<double> out);
void tanh_into(std::span<const double> x, std::span<double> out);

/// Probability vector proportional to exp(z). Throws ContractError on empty input.
std::vector<double> softmax(std::span<const double> z);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace mmal::numerics
