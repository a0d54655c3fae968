#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "mmal/models/ensemble.hpp"
#include "mmal/models/qnetwork.hpp"

namespace mmal::models {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to personalize without retraining.
struct ModelBundle {
  ClassifierEnsemble ensemble;
  std::optional<QNetwork> policy;
  /// Query strategy the bundle was trained for ("mmql-cont0", "rnd", ...).
  std::string strategy;
};

nlohmann::json to_json(const ClassifierEnsemble& ensemble);
ClassifierEnsemble ensemble_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QNetwork& q);
QNetwork qnetwork_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelBundle& bundle);
/// Throws ConfigError on a wrong format tag, version or malformed content.
ModelBundle bundle_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace mmal::models
