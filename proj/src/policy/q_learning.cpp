#include "mmal/policy/q_learning.hpp"

#include <algorithm>
#include <unordered_set>

#include "mmal/errors.hpp"
#include "mmal/numerics/tape.hpp"

namespace mmal::policy {

void RewardSpec::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("reward: gamma must be in [0, 1)");
}

double reward(Action action, std::size_t predicted, std::size_t truth, const RewardSpec& spec) {
  if (action == Action::kAsk) return spec.request;
  return predicted == truth ? spec.correct : spec.incorrect;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "replay memory: capacity must be positive");
}

void ReplayMemory::push(Transition t) {
  require(t.state != nullptr, "replay memory: transition without state");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t batch, std::mt19937_64& rng) const {
  std::vector<const Transition*> out;
  if (items_.empty() || batch == 0) return out;
  out.reserve(batch);
  const std::size_t n = items_.size();
  if (n < batch) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }
  // Floyd's algorithm: `batch` distinct indices in O(batch).
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t idx = pick(rng);
    const std::size_t take = chosen.insert(idx).second ? idx : j;
    if (take == j) chosen.insert(j);
    out.push_back(&items_[take]);
  }
  return out;
}

double bellman_target(const Transition& t, const models::QNetwork& q, const RewardSpec& spec) {
  if (t.terminal()) return t.reward;
  const auto next = q.forward(t.next->values);
  return t.reward + spec.gamma * std::max(next[0], next[1]);
}

QUpdateResult q_update(models::QNetwork& q, const ReplayMemory& memory, std::size_t batch_size,
                       const RewardSpec& spec, std::mt19937_64& rng, const models::QNetwork* target) {
  QUpdateResult result;
  if (memory.empty() || batch_size == 0) return result;
  const auto batch = memory.sample(batch_size, rng);
  const models::QNetwork& bootstrap = target != nullptr ? *target : q;

  std::vector<const Matrix*> next_states;
  for (const auto* t : batch)
    if (!t->terminal()) next_states.push_back(&t->next->values);
  std::vector<models::ActionScores> next_scores;
  if (!next_states.empty()) next_scores = bootstrap.forward_batch(next_states);

  Matrix targets(batch.size(), 1);
  std::vector<const Matrix*> states;
  std::vector<std::size_t> actions;
  std::size_t k = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    double y = t.reward;
    if (!t.terminal()) {
      y += spec.gamma * std::max(next_scores[k][0], next_scores[k][1]);
      ++k;
    }
    targets(i, 0) = y;
    states.push_back(&t.state->values);
    actions.push_back(static_cast<std::size_t>(t.action));
  }

  auto params = q.parameters();
  numerics::zero_grad(params);
  numerics::Tape tape;
  const auto chosen = numerics::pick(q.scores(tape, states), actions);
  const auto loss = numerics::mean(numerics::square(numerics::sub(chosen, tape.constant(targets))));
  tape.backward(loss);
  q.optimizer().update(params);
  result.updated = true;
  result.loss = loss.value()[0];
  return result;
}

Action select_action(const models::QNetwork& q, const PolicyState& state, double epsilon,
                     std::mt19937_64& rng) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "select_action: epsilon must be in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::bernoulli_distribution ask(0.5);
      return ask(rng) ? Action::kAsk : Action::kNoAsk;
    }
  }
  return models::greedy_action(q.forward(state.values));
}

double EpsilonSchedule::at(std::size_t episode, std::size_t total_episodes) const {
  const double horizon = decay_fraction * static_cast<double>(total_episodes);
  if (horizon <= 0.0) return end;
  const double frac = std::min(1.0, static_cast<double>(episode) / horizon);
  return start + (end - start) * frac;
}

}  // namespace mmal::policy
