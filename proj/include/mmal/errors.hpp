#pragma once

#include <stdexcept>
#include <string>

namespace mmal {

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// empty input, out-of-range label, ...).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Raised for invalid user-supplied configuration or malformed input files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace mmal
