#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmal/data/window.hpp"
#include "mmal/fusion/fusion.hpp"
#include "mmal/models/sequence_classifier.hpp"

namespace mmal::models {

/// How modalities map onto ensemble members.
struct FusionMode {
  enum class Kind { kModelLevel, kFeatureLevel, kSingleModality };
  Kind kind = Kind::kModelLevel;
  /// Modality index for kSingleModality.
  std::size_t modality = 0;

  static FusionMode model_level() { return {Kind::kModelLevel, 0}; }
  static FusionMode feature_level() { return {Kind::kFeatureLevel, 0}; }
  static FusionMode single(std::size_t m) { return {Kind::kSingleModality, m}; }

  /// Accepts "model", "feature" or a modality name from the schema.
  static FusionMode parse(std::string_view text, const data::DatasetSchema& schema);
  std::string name(const data::DatasetSchema& schema) const;

  /// Modality indices consumed by each member.
  std::vector<std::vector<std::size_t>> member_views(const data::DatasetSchema& schema) const;

  friend bool operator==(const FusionMode&, const FusionMode&) = default;
};

struct EnsembleConfig {
  std::size_t hidden = 64;
  bool sigmoid_head = true;
  numerics::AdamConfig adam{};
  ClassifierTrainOptions train{};
};

/// The modality classifiers phi^(1..M) (or a single classifier for
/// feature-level and uni-modal settings) plus their fusion.
class ClassifierEnsemble {
 public:
  ClassifierEnsemble() = default;
  ClassifierEnsemble(const data::DatasetSchema& schema, FusionMode mode, const EnsembleConfig& config,
                     std::mt19937_64& rng);

  std::size_t size() const { return members_.size(); }
  const FusionMode& mode() const { return mode_; }
  const data::DatasetSchema& schema() const { return schema_; }
  const std::vector<std::vector<std::size_t>>& views() const { return views_; }
  std::vector<SequenceClassifier>& members() { return members_; }
  const std::vector<SequenceClassifier>& members() const { return members_; }
  const ClassifierTrainOptions& train_options() const { return train_options_; }
  void set_train_options(const ClassifierTrainOptions& options) { train_options_ = options; }

  fusion::EnsembleOutput predict(const data::MultiModalWindow& window) const;
  std::vector<fusion::EnsembleOutput> predict_batch(
      std::span<const data::MultiModalWindow* const> windows) const;
  /// Fused class (majority vote) for each window.
  std::vector<std::size_t> classify(std::span<const data::MultiModalWindow* const> windows) const;

  /// Train every member on the labelled pool. Empty pool: no-op (trained=false).
  std::vector<TrainSummary> train(std::span<const data::MultiModalWindow* const> pool,
                                  std::mt19937_64& rng);

  void reset_optimizers();

  /// Assemble from already-built members (checkpoint loading).
  static ClassifierEnsemble from_members(const data::DatasetSchema& schema, FusionMode mode,
                                         std::vector<SequenceClassifier> members,
                                         ClassifierTrainOptions train_options);

 private:
  data::DatasetSchema schema_;
  FusionMode mode_;
  std::vector<std::vector<std::size_t>> views_;
  std::vector<SequenceClassifier> members_;
  ClassifierTrainOptions train_options_;
};

}  // namespace mmal::models
