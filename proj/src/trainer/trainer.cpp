#include "mmal/trainer/trainer.hpp"

#include <algorithm>
#include <random>

#include "mmal/data/generator.hpp"
#include "mmal/errors.hpp"
#include "mmal/policy/baselines.hpp"

namespace mmal::trainer {

Strategy parse_strategy(std::string_view text) {
  if (text == "mmql-cont0" || text == "mmql") return Strategy::kMmqlCont0;
  if (text == "mmql-cont1") return Strategy::kMmqlCont1;
  if (text == "unc" || text == "UNC") return Strategy::kUncertainty;
  if (text == "rnd" || text == "RND") return Strategy::kRandom;
  throw ConfigError("unknown strategy '" + std::string(text) +
                    "' (expected mmql-cont0, mmql-cont1, unc or rnd)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kMmqlCont0:
      return "mmql-cont0";
    case Strategy::kMmqlCont1:
      return "mmql-cont1";
    case Strategy::kUncertainty:
      return "unc";
    case Strategy::kRandom:
      return "rnd";
  }
  return "?";
}

bool uses_policy(Strategy s) { return s == Strategy::kMmqlCont0 || s == Strategy::kMmqlCont1; }

policy::StateMode state_mode(Strategy s) {
  return s == Strategy::kMmqlCont1 ? policy::StateMode::kRawFeatures
                                   : policy::StateMode::kClassifierOutput;
}

void TrainConfig::validate() const {
  if (episodes == 0) throw ConfigError("train: episodes must be >= 1");
  if (budget == 0) throw ConfigError("train: budget must be >= 1");
  if (replay_capacity == 0) throw ConfigError("train: replay capacity must be >= 1");
  if (q_batch_size == 0) throw ConfigError("train: q batch size must be >= 1");
  if (ensemble.train.batch_size == 0) throw ConfigError("train: classifier batch size must be >= 1");
  if (target_network && target_sync_interval == 0)
    throw ConfigError("train: target_sync_interval must be >= 1");
  if (exploration.start < 0 || exploration.start > 1 || exploration.end < 0 || exploration.end > 1)
    throw ConfigError("train: exploration epsilon must be in [0, 1]");
  reward.validate();
}

namespace {

nlohmann::json adam_json(const numerics::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"epsilon", a.epsilon}, {"max_grad_norm", a.max_grad_norm}};
}

numerics::AdamConfig adam_from(const nlohmann::json& j, numerics::AdamConfig a) {
  a.learning_rate = j.value("learning_rate", a.learning_rate);
  a.beta1 = j.value("beta1", a.beta1);
  a.beta2 = j.value("beta2", a.beta2);
  a.epsilon = j.value("epsilon", a.epsilon);
  a.max_grad_norm = j.value("max_grad_norm", a.max_grad_norm);
  return a;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"episodes", c.episodes},
      {"epochs_per_episode", c.epochs_per_episode},
      {"budget", c.budget},
      {"strategy", to_string(c.strategy)},
      {"fusion", c.fusion.kind == models::FusionMode::Kind::kModelLevel     ? std::string("model")
                 : c.fusion.kind == models::FusionMode::Kind::kFeatureLevel ? std::string("feature")
                 : "modality:" + std::to_string(c.fusion.modality)},
      {"classifier",
       {{"hidden", c.ensemble.hidden},
        {"sigmoid_head", c.ensemble.sigmoid_head},
        {"batch_size", c.ensemble.train.batch_size},
        {"adam", adam_json(c.ensemble.adam)}}},
      {"q_network", {{"hidden", c.q_hidden}, {"adam", adam_json(c.q_adam)}}},
      {"reward",
       {{"request", c.reward.request},
        {"correct", c.reward.correct},
        {"incorrect", c.reward.incorrect},
        {"gamma", c.reward.gamma}}},
      {"replay_capacity", c.replay_capacity},
      {"q_batch_size", c.q_batch_size},
      {"exploration",
       {{"start", c.exploration.start},
        {"end", c.exploration.end},
        {"decay_fraction", c.exploration.decay_fraction}}},
      {"target_network", c.target_network},
      {"target_sync_interval", c.target_sync_interval},
      {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const data::DatasetSchema& schema) {
  TrainConfig c;
  c.episodes = j.value("episodes", c.episodes);
  c.epochs_per_episode = j.value("epochs_per_episode", c.epochs_per_episode);
  c.budget = j.value("budget", c.budget);
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("fusion")) c.fusion = models::FusionMode::parse(j.at("fusion").get<std::string>(), schema);
  if (j.contains("classifier")) {
    const auto& cj = j.at("classifier");
    c.ensemble.hidden = cj.value("hidden", c.ensemble.hidden);
    c.ensemble.sigmoid_head = cj.value("sigmoid_head", c.ensemble.sigmoid_head);
    c.ensemble.train.batch_size = cj.value("batch_size", c.ensemble.train.batch_size);
    if (cj.contains("adam")) c.ensemble.adam = adam_from(cj.at("adam"), c.ensemble.adam);
  }
  if (j.contains("q_network")) {
    const auto& qj = j.at("q_network");
    c.q_hidden = qj.value("hidden", c.q_hidden);
    if (qj.contains("adam")) c.q_adam = adam_from(qj.at("adam"), c.q_adam);
  }
  if (j.contains("reward")) {
    const auto& rj = j.at("reward");
    c.reward.request = rj.value("request", c.reward.request);
    c.reward.correct = rj.value("correct", c.reward.correct);
    c.reward.incorrect = rj.value("incorrect", c.reward.incorrect);
    c.reward.gamma = rj.value("gamma", c.reward.gamma);
  }
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.q_batch_size = j.value("q_batch_size", c.q_batch_size);
  if (j.contains("exploration")) {
    const auto& ej = j.at("exploration");
    c.exploration.start = ej.value("start", c.exploration.start);
    c.exploration.end = ej.value("end", c.exploration.end);
    c.exploration.decay_fraction = ej.value("decay_fraction", c.exploration.decay_fraction);
  }
  c.target_network = j.value("target_network", c.target_network);
  c.target_sync_interval = j.value("target_sync_interval", c.target_sync_interval);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void to_json(nlohmann::json& j, const EpisodeLog& log) {
  j = nlohmann::json{{"episode", log.episode},
                     {"scanned", log.scanned},
                     {"labels_acquired", log.labels_acquired},
                     {"budget_filled", log.budget_filled},
                     {"cumulative_reward", log.cumulative_reward},
                     {"mean_bellman_loss", log.mean_bellman_loss},
                     {"q_updates", log.q_updates},
                     {"epsilon", log.epsilon},
                     {"classifier_loss", log.classifier_loss},
                     {"stream_accuracy", log.stream_accuracy}};
}

namespace {

// One seeded stream per use.
enum Stream : std::uint64_t { kInit = 1, kShuffle, kExplore, kReplay, kClassifier, kBaseline };

/// Ensemble outputs over the shuffled stream, evaluated in chunks on demand.
class LazyPredictions {
 public:
  LazyPredictions(const models::ClassifierEnsemble& ensemble,
                  const std::vector<const data::MultiModalWindow*>& stream)
      : ensemble_(ensemble), stream_(stream), outputs_(stream.size()) {}

  const fusion::EnsembleOutput& at(std::size_t i) {
    if (i >= computed_) {
      const std::size_t end = std::min(stream_.size(), std::max(i + 1, computed_ + kChunk));
      auto batch = ensemble_.predict_batch(
          std::span(stream_).subspan(computed_, end - computed_));
      for (std::size_t k = 0; k < batch.size(); ++k) outputs_[computed_ + k] = std::move(batch[k]);
      computed_ = end;
    }
    return outputs_[i];
  }

 private:
  static constexpr std::size_t kChunk = 32;
  const models::ClassifierEnsemble& ensemble_;
  const std::vector<const data::MultiModalWindow*>& stream_;
  std::vector<fusion::EnsembleOutput> outputs_;
  std::size_t computed_ = 0;
};

std::vector<const data::MultiModalWindow*> pooled_stream(const data::Dataset& dataset) {
  std::vector<const data::MultiModalWindow*> stream;
  for (const auto& s : dataset.train)
    for (const auto& w : s.windows) {
      if (!w.label)
        throw ConfigError("train: window " + w.subject_id + "#" + std::to_string(w.index) +
                          " has no label");
      stream.push_back(&w);
    }
  if (stream.empty()) throw ConfigError("train: dataset has no training windows");
  return stream;
}

TrainResult run_episodes(const data::Dataset& dataset, const TrainConfig& config) {
  config.validate();
  auto stream = pooled_stream(dataset);
  const bool with_policy = uses_policy(config.strategy);
  const policy::StateMode mode = state_mode(config.strategy);

  std::mt19937_64 init_rng(data::derive_seed(config.seed, kInit));
  std::mt19937_64 shuffle_rng(data::derive_seed(config.seed, kShuffle));
  std::mt19937_64 explore_rng(data::derive_seed(config.seed, kExplore));
  std::mt19937_64 replay_rng(data::derive_seed(config.seed, kReplay));
  std::mt19937_64 classifier_rng(data::derive_seed(config.seed, kClassifier));
  std::mt19937_64 baseline_rng(data::derive_seed(config.seed, kBaseline));

  TrainResult result;
  result.config = config;
  models::EnsembleConfig ens_cfg = config.ensemble;
  ens_cfg.train.epochs = config.epochs_per_episode;
  result.ensemble = models::ClassifierEnsemble(dataset.schema, config.fusion, ens_cfg, init_rng);
  auto& ensemble = result.ensemble;

  policy::ReplayMemory memory(config.replay_capacity);
  std::optional<models::QNetwork> target;
  std::size_t total_q_updates = 0;
  if (with_policy) {
    result.policy.emplace(policy::qnetwork_shape(mode, ensemble, config.q_hidden), config.q_adam, init_rng);
    if (config.target_network) target = *result.policy;
  }

  for (std::size_t e = 0; e < config.episodes; ++e) {
    EpisodeLog log;
    log.episode = e;
    log.epsilon = with_policy ? config.exploration.at(e, config.episodes) : 0.0;
    std::shuffle(stream.begin(), stream.end(), shuffle_rng);
    LazyPredictions predictions(ensemble, stream);
    std::vector<const data::MultiModalWindow*> labeled;
    std::optional<policy::BaselineSelector> selector;
    if (!with_policy) {
      selector.emplace(config.strategy == Strategy::kRandom ? policy::BaselineSelector::Kind::kRandom
                                                            : policy::BaselineSelector::Kind::kUncertainty,
                       config.budget, stream.size());
    }

    const auto make_state = [&](std::size_t i) {
      return std::make_shared<const policy::PolicyState>(
          policy::build_state(*stream[i], predictions.at(i), ensemble, mode));
    };

    double loss_sum = 0.0;
    std::size_t correct = 0;
    policy::StatePtr state = with_policy ? make_state(0) : nullptr;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const auto& window = *stream[i];
      const auto& outputs = predictions.at(i);
      const std::size_t predicted = fusion::majority_vote(outputs);
      const std::size_t truth = *window.label;
      ++log.scanned;
      if (predicted == truth) ++correct;

      const models::Action action = with_policy
                                        ? policy::select_action(*result.policy, *state, log.epsilon, explore_rng)
                                        : selector->decide(outputs, baseline_rng);
      if (action == models::Action::kAsk) labeled.push_back(&window);
      const double r = policy::reward(action, predicted, truth, config.reward);
      log.cumulative_reward += r;

      if (labeled.size() == config.budget) {
        if (with_policy) memory.push({state, action, r, nullptr});
        log.budget_filled = true;
        break;
      }
      if (!with_policy || i + 1 == stream.size()) continue;

      policy::StatePtr next = make_state(i + 1);
      memory.push({state, action, r, next});
      const auto upd = policy::q_update(*result.policy, memory, config.q_batch_size, config.reward,
                                        replay_rng, target ? &*target : nullptr);
      if (upd.updated) {
        loss_sum += upd.loss;
        ++log.q_updates;
        ++total_q_updates;
        if (target && total_q_updates % config.target_sync_interval == 0) target = *result.policy;
      }
      state = std::move(next);
    }
    if (labeled.size() > config.budget) throw ContractError("train: budget exceeded");
    log.labels_acquired = labeled.size();
    log.mean_bellman_loss = log.q_updates > 0 ? loss_sum / static_cast<double>(log.q_updates) : 0.0;
    log.stream_accuracy = static_cast<double>(correct) / static_cast<double>(log.scanned);

    const auto summaries = ensemble.train(labeled, classifier_rng);
    double closs = 0.0;
    for (const auto& s : summaries) closs += s.final_loss;
    log.classifier_loss = closs / static_cast<double>(summaries.size());
    result.logs.push_back(log);
  }
  return result;
}

}  // namespace

TrainResult run_mmql(const data::Dataset& dataset, const TrainConfig& config) {
  if (!uses_policy(config.strategy))
    throw ConfigError("run_mmql: strategy " + to_string(config.strategy) + " is not an MMQL strategy");
  return run_episodes(dataset, config);
}

TrainResult run_baseline(const data::Dataset& dataset, const TrainConfig& config) {
  if (uses_policy(config.strategy))
    throw ConfigError("run_baseline: strategy " + to_string(config.strategy) + " is not a baseline");
  return run_episodes(dataset, config);
}

TrainResult train(const data::Dataset& dataset, const TrainConfig& config) {
  return run_episodes(dataset, config);
}

}  // namespace mmal::trainer
