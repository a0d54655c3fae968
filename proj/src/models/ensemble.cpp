#include "mmal/models/ensemble.hpp"

#include <numeric>

#include "mmal/errors.hpp"

namespace mmal::models {

FusionMode FusionMode::parse(std::string_view text, const data::DatasetSchema& schema) {
  if (text == "model" || text == "model-f") return model_level();
  if (text == "feature" || text == "feature-f") return feature_level();
  for (std::size_t m = 0; m < schema.modalities.size(); ++m)
    if (schema.modalities[m].name == text) return single(m);
  constexpr std::string_view kIndexed = "modality:";
  if (text.starts_with(kIndexed)) {
    const std::string digits(text.substr(kIndexed.size()));
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
      const std::size_t m = std::stoul(digits);
      if (m < schema.modalities.size()) return single(m);
    }
  }
  throw ConfigError("unknown fusion mode '" + std::string(text) +
                    "' (expected model, feature or a modality name)");
}

std::string FusionMode::name(const data::DatasetSchema& schema) const {
  switch (kind) {
    case Kind::kModelLevel:
      return "model";
    case Kind::kFeatureLevel:
      return "feature";
    case Kind::kSingleModality:
      return schema.modalities.at(modality).name;
  }
  return "?";
}

std::vector<std::vector<std::size_t>> FusionMode::member_views(const data::DatasetSchema& schema) const {
  const std::size_t count = schema.modalities.size();
  require(count > 0, "fusion mode: schema has no modalities");
  std::vector<std::vector<std::size_t>> views;
  switch (kind) {
    case Kind::kModelLevel:
      for (std::size_t m = 0; m < count; ++m) views.push_back({m});
      break;
    case Kind::kFeatureLevel: {
      std::vector<std::size_t> all(count);
      std::iota(all.begin(), all.end(), 0);
      views.push_back(std::move(all));
      break;
    }
    case Kind::kSingleModality:
      require(modality < count, "fusion mode: modality index out of range");
      views.push_back({modality});
      break;
  }
  return views;
}

ClassifierEnsemble::ClassifierEnsemble(const data::DatasetSchema& schema, FusionMode mode,
                                       const EnsembleConfig& config, std::mt19937_64& rng)
    : schema_(schema), mode_(mode), views_(mode.member_views(schema)), train_options_(config.train) {
  for (const auto& view : views_) {
    ClassifierConfig cc;
    cc.input_dim = 0;
    for (std::size_t m : view) cc.input_dim += schema.modalities[m].dim;
    cc.steps = schema.steps;
    cc.hidden = config.hidden;
    cc.num_classes = data::kNumClasses;
    cc.sigmoid_head = config.sigmoid_head;
    members_.emplace_back(cc, config.adam, rng);
  }
}

ClassifierEnsemble ClassifierEnsemble::from_members(const data::DatasetSchema& schema, FusionMode mode,
                                                    std::vector<SequenceClassifier> members,
                                                    ClassifierTrainOptions train_options) {
  ClassifierEnsemble e;
  e.schema_ = schema;
  e.mode_ = mode;
  e.views_ = mode.member_views(schema);
  require(members.size() == e.views_.size(), "ensemble: member count does not match fusion mode");
  e.members_ = std::move(members);
  e.train_options_ = train_options;
  return e;
}

namespace {

/// Member inputs for a batch of windows; single-modality views borrow the
/// window's own matrix, multi-modality views are concatenated into storage.
struct MemberInputs {
  std::vector<numerics::Matrix> storage;
  std::vector<const numerics::Matrix*> pointers;
};

MemberInputs gather(std::span<const data::MultiModalWindow* const> windows,
                    const std::vector<std::size_t>& view) {
  MemberInputs in;
  in.storage.reserve(view.size() > 1 ? windows.size() : 0);
  for (const auto* w : windows) {
    require(w != nullptr, "ensemble: null window");
    if (view.size() == 1) {
      require(view.front() < w->modalities.size(), "ensemble: window is missing a modality");
      in.pointers.push_back(&w->modalities[view.front()]);
    } else {
      in.storage.push_back(fusion::feature_concat(*w, view));
      in.pointers.push_back(&in.storage.back());
    }
  }
  return in;
}

}  // namespace

std::vector<fusion::EnsembleOutput> ClassifierEnsemble::predict_batch(
    std::span<const data::MultiModalWindow* const> windows) const {
  std::vector<std::vector<std::vector<double>>> probs(windows.size());
  if (windows.empty()) return {};
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const auto in = gather(windows, views_[k]);
    auto preds = members_[k].predict_batch(in.pointers);
    for (std::size_t i = 0; i < windows.size(); ++i) probs[i].push_back(std::move(preds[i].probabilities));
  }
  std::vector<fusion::EnsembleOutput> out;
  out.reserve(windows.size());
  for (auto& p : probs) out.push_back(fusion::make_output(std::move(p)));
  return out;
}

fusion::EnsembleOutput ClassifierEnsemble::predict(const data::MultiModalWindow& window) const {
  const data::MultiModalWindow* one[] = {&window};
  return predict_batch(one).front();
}

std::vector<std::size_t> ClassifierEnsemble::classify(
    std::span<const data::MultiModalWindow* const> windows) const {
  std::vector<std::size_t> out;
  out.reserve(windows.size());
  for (const auto& o : predict_batch(windows)) out.push_back(fusion::majority_vote(o));
  return out;
}

std::vector<TrainSummary> ClassifierEnsemble::train(
    std::span<const data::MultiModalWindow* const> pool, std::mt19937_64& rng) {
  std::vector<TrainSummary> summaries(members_.size());
  if (pool.empty()) return summaries;
  std::vector<std::size_t> labels;
  labels.reserve(pool.size());
  for (const auto* w : pool) {
    if (!w->label.has_value())
      throw ContractError("ensemble train: window " + w->subject_id + "#" + std::to_string(w->index) +
                          " has no label");
    labels.push_back(*w->label);
  }
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const auto in = gather(pool, views_[k]);
    summaries[k] = members_[k].train(in.pointers, labels, train_options_, rng);
  }
  return summaries;
}

void ClassifierEnsemble::reset_optimizers() {
  for (auto& m : members_) m.reset_optimizer();
}

}  // namespace mmal::models
