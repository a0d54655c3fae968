#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmal/data/generator.hpp"
#include "mmal/trainer/trainer.hpp"

namespace mmal::harness {

/// One full experiment: data source, the strategy x fusion x budget x seed
/// grid, and the shared training and personalization settings.
struct ExperimentConfig {
  /// Load this dataset directory instead of generating one per seed.
  std::optional<std::filesystem::path> dataset_path;
  data::GeneratorConfig generator{};
  /// z-score every dataset with training-subject statistics.
  bool normalize = true;

  std::vector<trainer::Strategy> strategies{trainer::Strategy::kMmqlCont0, trainer::Strategy::kUncertainty,
                                            trainer::Strategy::kRandom};
  /// "model", "feature", a modality name or "modality:<i>".
  std::vector<std::string> fusions{"model"};
  std::vector<std::size_t> budgets{5, 10, 20, 50, 100};
  std::size_t seeds = 3;
  std::uint64_t master_seed = 1;

  /// Shuffled re-runs of the personalization per subject; rows report the mean.
  std::size_t personalization_repeats = 10;
  std::size_t personalization_epochs = 10;

  /// Template for every cell; strategy, fusion, budget and seed are overridden.
  trainer::TrainConfig train{};

  std::filesystem::path output_dir = "mmal_out";
  /// Worker threads for grid cells; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  /// Throws ConfigError on empty lists or invalid settings.
  void validate() const;
};

/// Replaces "per-modality" with one entry per schema modality and drops duplicates.
std::vector<std::string> expand_fusions(const std::vector<std::string>& fusions, const data::DatasetSchema& schema);

nlohmann::json to_json(const data::GeneratorConfig& g);
data::GeneratorConfig generator_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// MMAL_OUTPUT_DIR, when set and non-empty, replaces config.output_dir.
void apply_environment(ExperimentConfig& config);

/// Schema the config resolves to (generator schema or the dataset manifest).
data::DatasetSchema experiment_schema(const ExperimentConfig& config);

}  // namespace mmal::harness
