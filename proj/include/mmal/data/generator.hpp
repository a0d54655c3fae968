#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mmal/data/window.hpp"

namespace mmal::data {

/// Synthetic stand-in for a multi-modal engagement corpus.
///
/// Every (class, modality) pair has a group-level prototype sequence. Each
/// subject perturbs those prototypes with a persistent offset of size
/// `subject_shift` (a part shared by all classes plus a class-specific
/// part), draws its own class prior, and emits windows as prototype plus
/// AR(1) noise along the time axis.
struct GeneratorConfig {
  DatasetSchema schema = desk_schema();
  std::size_t train_subjects = 6;
  std::size_t test_subjects = 4;
  std::size_t windows_per_subject = 60;
  /// Session length for test subjects; 0 means windows_per_subject.
  std::size_t test_windows_per_subject = 0;
  /// Standard deviation of the group class prototypes.
  double class_separation = 1.0;
  /// Per-modality multiplier on class_separation; empty means all 1.
  std::vector<double> modality_strength;
  /// Standard deviation of the per-subject prototype offsets.
  double subject_shift = 1.0;
  /// AR(1) coefficient of the within-window noise, in [0, 1).
  double temporal_smoothness = 0.7;
  double noise_scale = 1.0;
  /// Dirichlet concentration of per-subject class priors.
  double prior_concentration = 1.0;
  /// Probability that a subject has one class removed from its prior.
  double missing_class_probability = 0.3;
  /// Explicit priors for the first subjects (train subjects first, then test).
  std::vector<std::array<double, kNumClasses>> subject_priors;
  std::uint64_t seed = 1;

  /// Throws ConfigError on invalid settings.
  void validate() const;
};

/// Deterministic given config.seed.
Dataset generate(const GeneratorConfig& config);

/// Mixes a master seed with a stream tag (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mmal::data
