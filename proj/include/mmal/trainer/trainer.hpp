#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmal/data/window.hpp"
#include "mmal/models/ensemble.hpp"
#include "mmal/models/qnetwork.hpp"
#include "mmal/policy/q_learning.hpp"

namespace mmal::trainer {

/// Data-selection strategy: the learned Q-policy with either state form,
/// or one of the heuristic baselines.
enum class Strategy { kMmqlCont0, kMmqlCont1, kUncertainty, kRandom };

Strategy parse_strategy(std::string_view text);
std::string to_string(Strategy s);
bool uses_policy(Strategy s);
policy::StateMode state_mode(Strategy s);

struct TrainConfig {
  std::size_t episodes = 100;
  std::size_t epochs_per_episode = 10;
  std::size_t budget = 10;
  Strategy strategy = Strategy::kMmqlCont0;
  models::FusionMode fusion = models::FusionMode::model_level();
  models::EnsembleConfig ensemble{};
  std::size_t q_hidden = 32;
  numerics::AdamConfig q_adam{};
  policy::RewardSpec reward{};
  std::size_t replay_capacity = 10000;
  std::size_t q_batch_size = 32;
  policy::EpsilonSchedule exploration{};
  /// Bootstrap targets from a periodically synced copy instead of the live network.
  bool target_network = false;
  std::size_t target_sync_interval = 100;
  std::uint64_t seed = 1;

  /// Throws ConfigError on invalid settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; `schema` resolves fusion names.
TrainConfig train_config_from_json(const nlohmann::json& j, const data::DatasetSchema& schema);

struct EpisodeLog {
  std::size_t episode = 0;
  /// Windows examined before the budget filled (or the stream ended).
  std::size_t scanned = 0;
  std::size_t labels_acquired = 0;
  bool budget_filled = false;
  double cumulative_reward = 0.0;
  double mean_bellman_loss = 0.0;
  std::size_t q_updates = 0;
  double epsilon = 0.0;
  /// Mean final-epoch cross-entropy over the ensemble members (0 if untrained).
  double classifier_loss = 0.0;
  /// Fused accuracy over the scanned windows, before the episode's update.
  double stream_accuracy = 0.0;
};

void to_json(nlohmann::json& j, const EpisodeLog& log);

struct TrainResult {
  models::ClassifierEnsemble ensemble;
  /// Present for MMQL strategies.
  std::optional<models::QNetwork> policy;
  std::vector<EpisodeLog> logs;
  TrainConfig config;
};

/// Episodic joint training of the classifier ensemble and the query policy
/// over the pooled, per-episode shuffled stream of training windows.
TrainResult run_mmql(const data::Dataset& dataset, const TrainConfig& config);

/// Same episode loop with the policy replaced by a heuristic selector.
TrainResult run_baseline(const data::Dataset& dataset, const TrainConfig& config);

/// Dispatches on config.strategy.
TrainResult train(const data::Dataset& dataset, const TrainConfig& config);

}  // namespace mmal::trainer
