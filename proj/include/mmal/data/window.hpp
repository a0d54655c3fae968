#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mmal/numerics/matrix.hpp"

namespace mmal::data {

using numerics::Matrix;

/// Engagement levels: 0 = low, 1 = medium, 2 = high.
inline constexpr std::size_t kNumClasses = 3;
using Label = std::size_t;

struct ModalitySpec {
  std::string name;
  std::size_t dim = 0;

  friend bool operator==(const ModalitySpec&, const ModalitySpec&) = default;
};

/// Layout shared by every window of a dataset.
struct DatasetSchema {
  std::size_t steps = 10;
  std::vector<ModalitySpec> modalities;
  std::vector<std::string> label_names{"low", "medium", "high"};

  std::size_t total_dim() const;
  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

/// Canonical modality order and dimensions of the therapy corpus.
DatasetSchema full_schema();
/// Same modalities with small dimensions for fast runs.
DatasetSchema desk_schema();

/// One 1-second sample: a (steps x dim) sequence per modality.
struct MultiModalWindow {
  std::string subject_id;
  std::size_t index = 0;
  std::vector<Matrix> modalities;
  std::optional<Label> label;

  std::size_t steps() const { return modalities.empty() ? 0 : modalities.front().rows(); }
  /// Throws ContractError if the window does not fit `schema`.
  void validate(const DatasetSchema& schema) const;

  friend bool operator==(const MultiModalWindow&, const MultiModalWindow&) = default;
};

/// All windows of one subject's recording, in recording order.
struct SubjectSession {
  std::string subject_id;
  std::vector<MultiModalWindow> windows;

  std::array<std::size_t, kNumClasses> class_counts() const;
  void validate(const DatasetSchema& schema) const;

  friend bool operator==(const SubjectSession&, const SubjectSession&) = default;
};

struct Dataset {
  DatasetSchema schema;
  std::vector<SubjectSession> train;
  std::vector<SubjectSession> test;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace mmal::data
