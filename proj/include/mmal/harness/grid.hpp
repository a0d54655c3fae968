#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmal/harness/config.hpp"
#include "mmal/harness/report.hpp"
#include "mmal/personalize/personalize.hpp"

namespace mmal::harness {

/// Training seed of a grid cell, independent of grid order.
std::uint64_t cell_seed(std::uint64_t master, trainer::Strategy strategy, std::size_t budget, std::size_t repeat);

/// Dataset of one seed index: generated (or loaded) and optionally normalized.
data::Dataset experiment_dataset(const ExperimentConfig& config, std::size_t seed_index);

struct CellResult {
  std::string strategy;
  std::string fusion;
  std::size_t budget = 0;
  std::size_t seed = 0;
  std::uint64_t train_seed = 0;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::vector<trainer::EpisodeLog> logs;
  /// Largest label count seen in any training episode or personalization.
  std::size_t max_train_labels = 0;
  std::size_t max_personalize_labels = 0;
};

struct GridResult {
  std::vector<ReportRow> rows;
  std::vector<CellResult> cells;
};

struct GridOptions {
  /// Write per-cell episode logs (JSON lines) under output_dir/logs.
  bool write_logs = true;
  /// Called after each finished cell (from worker threads, serialized).
  std::function<void(const CellResult&, std::size_t done, std::size_t total)> progress;
};

/// Runs every cell of the grid. Failed cells are recorded in `cells`;
/// throws if every cell failed or if any label budget was exceeded.
GridResult run_grid(const ExperimentConfig& config, const GridOptions& options = {});

/// Personalizes each test subject `repeats` times and averages into rows.
/// Shuffle seeds depend only on (master seed, seed index, subject, repeat).
std::vector<ReportRow> personalize_rows(const data::Dataset& dataset, const models::ClassifierEnsemble& ensemble,
                                        const personalize::QuerySource& source, std::size_t budget,
                                        std::size_t epochs, std::size_t repeats, std::uint64_t master_seed,
                                        std::size_t seed_index, std::size_t* max_labels = nullptr);

}  // namespace mmal::harness
