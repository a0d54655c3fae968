#include "mmal/personalize/personalize.hpp"

#include <algorithm>
#include <random>

#include "mmal/data/generator.hpp"
#include "mmal/errors.hpp"
#include "mmal/policy/baselines.hpp"
#include "mmal/policy/q_learning.hpp"

namespace mmal::personalize {

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"count", m.count}, {"confusion", m.confusion}};
}

}  // namespace

void to_json(nlohmann::json& j, const PersonalizationResult& r) {
  j = nlohmann::json{{"subject_id", r.subject_id},
                     {"budget", r.budget},
                     {"budget_used", r.budget_used},
                     {"scanned", r.scanned},
                     {"queried_indices", r.queried_indices},
                     {"evaluated_indices", r.evaluated_indices},
                     {"before", metrics_json(r.before)},
                     {"after", metrics_json(r.after)},
                     {"evaluation_empty", r.evaluation_empty}};
}

PersonalizationOutcome personalize_subject(const data::SubjectSession& session,
                                           const models::ClassifierEnsemble& ensemble,
                                           const QuerySource& source, const PersonalizeOptions& options) {
  const bool with_policy = trainer::uses_policy(source.strategy);
  require(!with_policy || source.policy != nullptr, "personalize: MMQL strategy needs a trained policy");
  for (const auto& w : session.windows)
    require(w.label.has_value(), "personalize: window " + w.subject_id + "#" + std::to_string(w.index) +
                                     " lacks the expert label");

  std::mt19937_64 shuffle_rng(data::derive_seed(options.seed, 11));
  std::mt19937_64 select_rng(data::derive_seed(options.seed, 12));
  std::mt19937_64 train_rng(data::derive_seed(options.seed, 13));

  std::vector<const data::MultiModalWindow*> stream;
  for (const auto& w : session.windows) stream.push_back(&w);
  std::shuffle(stream.begin(), stream.end(), shuffle_rng);

  PersonalizationResult result;
  result.subject_id = session.subject_id;
  result.budget = options.budget;

  const auto outputs = ensemble.predict_batch(stream);
  std::vector<bool> queried(stream.size(), false);
  std::vector<const data::MultiModalWindow*> labeled;
  if (options.budget > 0) {
    std::optional<policy::BaselineSelector> selector;
    if (!with_policy)
      selector.emplace(source.strategy == trainer::Strategy::kRandom ? policy::BaselineSelector::Kind::kRandom
                                                                     : policy::BaselineSelector::Kind::kUncertainty,
                       options.budget, stream.size());
    const auto mode = trainer::state_mode(source.strategy);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      ++result.scanned;
      models::Action action;
      if (with_policy) {
        const auto state = policy::build_state(*stream[i], outputs[i], ensemble, mode);
        action = policy::select_action(*source.policy, state, 0.0, select_rng);
      } else {
        action = selector->decide(outputs[i], select_rng);
      }
      if (action == models::Action::kAsk) {
        queried[i] = true;
        labeled.push_back(stream[i]);
        result.queried_indices.push_back(stream[i]->index);
      }
      if (labeled.size() == options.budget) break;
    }
  }
  result.budget_used = labeled.size();
  if (result.budget_used > options.budget) throw ContractError("personalize: budget exceeded");

  PersonalizationOutcome outcome{std::move(result), ensemble};
  auto& adapted = outcome.adapted;
  if (!labeled.empty()) {
    adapted.reset_optimizers();
    auto train_options = adapted.train_options();
    train_options.epochs = options.epochs;
    adapted.set_train_options(train_options);
    adapted.train(labeled, train_rng);
  }

  std::vector<const data::MultiModalWindow*> evaluation;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> before;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (queried[i]) continue;
    evaluation.push_back(stream[i]);
    labels.push_back(*stream[i]->label);
    before.push_back(fusion::majority_vote(outputs[i]));
    outcome.result.evaluated_indices.push_back(stream[i]->index);
  }
  std::sort(outcome.result.evaluated_indices.begin(), outcome.result.evaluated_indices.end());
  if (evaluation.empty()) {
    outcome.result.evaluation_empty = true;
    return outcome;
  }
  outcome.result.before = compute_metrics(before, labels);
  outcome.result.after = labeled.empty() ? outcome.result.before
                                         : compute_metrics(adapted.classify(evaluation), labels);
  return outcome;
}

}  // namespace mmal::personalize
