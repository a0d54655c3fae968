#include "mmal/data/window.hpp"

#include "mmal/errors.hpp"

namespace mmal::data {

std::size_t DatasetSchema::total_dim() const {
  std::size_t total = 0;
  for (const auto& m : modalities) total += m.dim;
  return total;
}

DatasetSchema full_schema() {
  return {10, {{"face", 257}, {"body", 70}, {"a-phys", 27}, {"audio", 24}}, {"low", "medium", "high"}};
}

DatasetSchema desk_schema() {
  return {10, {{"face", 8}, {"body", 6}, {"a-phys", 4}, {"audio", 4}}, {"low", "medium", "high"}};
}

void MultiModalWindow::validate(const DatasetSchema& schema) const {
  const std::string where = "window " + subject_id + "#" + std::to_string(index);
  require(modalities.size() == schema.modalities.size(),
          where + ": has " + std::to_string(modalities.size()) + " modalities, schema has " +
              std::to_string(schema.modalities.size()));
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    require(modalities[m].rows() == schema.steps && modalities[m].cols() == schema.modalities[m].dim,
            where + ": modality " + schema.modalities[m].name + " has shape " +
                modalities[m].shape_string());
    require(modalities[m].all_finite(), where + ": non-finite feature");
  }
  if (label) require(*label < kNumClasses, where + ": label out of range");
}

std::array<std::size_t, kNumClasses> SubjectSession::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& w : windows)
    if (w.label) ++counts[*w.label];
  return counts;
}

void SubjectSession::validate(const DatasetSchema& schema) const {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    windows[i].validate(schema);
    if (i > 0)
      require(windows[i].index > windows[i - 1].index,
              "session " + subject_id + ": window indices must be strictly increasing");
  }
}

}  // namespace mmal::data
