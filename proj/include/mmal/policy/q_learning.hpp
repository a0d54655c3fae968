#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <random>
#include <vector>

#include "mmal/models/qnetwork.hpp"
#include "mmal/policy/state.hpp"

namespace mmal::policy {

using models::Action;

/// Query-cost reward and discount.
struct RewardSpec {
  double request = -0.05;
  double correct = 1.0;
  double incorrect = -1.0;
  double gamma = 0.9;

  /// Throws ConfigError unless gamma is in [0, 1).
  void validate() const;
};

/// Asking costs `request`; not asking pays `correct` or `incorrect`
/// depending on whether the fused prediction matches the true label.
double reward(Action action, std::size_t predicted, std::size_t truth, const RewardSpec& spec = {});

using StatePtr = std::shared_ptr<const PolicyState>;

struct Transition {
  StatePtr state;
  Action action = Action::kNoAsk;
  double reward = 0.0;
  /// Null marks the end of an episode (budget filled).
  StatePtr next;

  bool terminal() const { return next == nullptr; }
};

/// Bounded FIFO of transitions; the oldest entry is evicted first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 10000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  /// Uniform batch: without replacement when size() >= batch, otherwise with replacement.
  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

/// r for terminal transitions, r + gamma * max_a Q(s', a) otherwise.
double bellman_target(const Transition& t, const models::QNetwork& q, const RewardSpec& spec);

struct QUpdateResult {
  bool updated = false;
  /// Mean squared Bellman error of the sampled batch before the step.
  double loss = 0.0;
};

/// One Adam step on the mean squared Bellman error of a sampled batch.
/// Targets come from `target` when given, otherwise from `q` itself.
/// Empty memory: no-op.
QUpdateResult q_update(models::QNetwork& q, const ReplayMemory& memory, std::size_t batch_size,
                       const RewardSpec& spec, std::mt19937_64& rng,
                       const models::QNetwork* target = nullptr);

/// Epsilon-greedy decision; epsilon = 0 is the pure greedy policy.
Action select_action(const models::QNetwork& q, const PolicyState& state, double epsilon,
                     std::mt19937_64& rng);

/// Linear decay from `start` to `end` over the first `decay_fraction` of episodes.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay_fraction = 0.5;

  double at(std::size_t episode, std::size_t total_episodes) const;
};

}  // namespace mmal::policy
