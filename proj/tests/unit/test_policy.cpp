#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "helpers.hpp"
#include "mmal/errors.hpp"
#include "mmal/policy/baselines.hpp"
#include "mmal/policy/q_learning.hpp"
#include "mmal/policy/state.hpp"
#include "oracles.hpp"

using namespace mmal;
using namespace mmal::policy;
using models::Action;
using models::QNetwork;
using mmal::testing::random_matrix;

namespace {

StatePtr make_state(Matrix values) {
  return std::make_shared<const PolicyState>(PolicyState{StateMode::kClassifierOutput, std::move(values)});
}

double q_of(const QNetwork& q, const PolicyState& s, Action a) {
  return q.forward(s.values)[static_cast<std::size_t>(a)];
}

models::ClassifierEnsemble zero_head_ensemble(const data::DatasetSchema& schema) {
  std::mt19937_64 rng(1);
  models::ClassifierEnsemble e(schema, models::FusionMode::model_level(), models::EnsembleConfig{}, rng);
  for (auto& m : e.members()) {
    m.head_w.value.fill(0.0);
    m.head_b.value.fill(0.0);
  }
  return e;
}

}  // namespace

TEST_CASE("reward over every action, prediction and truth") {
  std::size_t n = 0;
  for (auto a : {Action::kNoAsk, Action::kAsk})
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t y = 0; y < 3; ++y) {
        CHECK(reward(a, p, y) == oracle::reward(a == Action::kAsk, p, y));
        ++n;
      }
  CHECK(n == 18);
  CHECK(reward(Action::kAsk, 1, 2) == -0.05);
  CHECK(reward(Action::kNoAsk, 2, 2) == 1.0);
  CHECK(reward(Action::kNoAsk, 0, 1) == -1.0);
}

TEST_CASE("classifier-output state layout") {
  const auto schema = data::desk_schema();
  const auto e = zero_head_ensemble(schema);
  const auto d = data::generate(mmal::testing::tiny_generator());
  const auto s = build_state(d.test[0].windows[0], e, StateMode::kClassifierOutput);
  REQUIRE(s.length() == 16);
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(s.values[4 * m + k] - 1.0 / 3.0) < 1e-15);
    CHECK(std::abs(s.values[4 * m + 3]) <= 1e-12);
  }
  CHECK(qnetwork_shape(StateMode::kClassifierOutput, e).input_dim == 16);
  CHECK(qnetwork_shape(StateMode::kClassifierOutput, e).steps == 1);
  const auto again = build_state(d.test[0].windows[0], e, StateMode::kClassifierOutput);
  CHECK(again.values == s.values);
}

TEST_CASE("raw-feature state holds T x total features") {
  const auto schema = data::full_schema();
  const auto e = zero_head_ensemble(schema);
  data::MultiModalWindow w;
  std::mt19937_64 rng(2);
  for (const auto& m : schema.modalities) w.modalities.push_back(random_matrix(schema.steps, m.dim, rng));
  const auto s = build_state(w, e, StateMode::kRawFeatures);
  CHECK(s.length() == 3780);
  CHECK(s.values.rows() == 10);
  CHECK(s.values.cols() == 378);
  const auto shape = qnetwork_shape(StateMode::kRawFeatures, e);
  CHECK(shape.steps == 10);
  CHECK(shape.input_dim == 378);
}

TEST_CASE("bellman targets") {
  std::mt19937_64 rng(3);
  QNetwork q({4, 1, 6}, {}, rng);
  q.head_w.value.fill(0.0);
  q.head_b.value = Matrix::row({2.0, 1.0});
  const auto s = make_state(random_matrix(1, 4, rng));
  RewardSpec spec;
  CHECK(bellman_target(Transition{s, Action::kAsk, -0.05, nullptr}, q, spec) == -0.05);
  CHECK(bellman_target(Transition{s, Action::kNoAsk, 0.0, s}, q, spec) == doctest::Approx(1.8).epsilon(1e-15));
  spec.gamma = 0.0;
  CHECK(bellman_target(Transition{s, Action::kNoAsk, 0.7, s}, q, spec) == 0.7);
  RewardSpec bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("single terminal transition converges to its reward") {
  std::mt19937_64 rng(4);
  QNetwork q({16, 1, 32}, {}, rng);
  const auto s = make_state(random_matrix(1, 16, rng, 0.3));
  ReplayMemory memory;
  memory.push({s, Action::kAsk, -0.05, nullptr});
  for (int i = 0; i < 500; ++i) q_update(q, memory, 1, RewardSpec{}, rng);
  CHECK(std::abs(q_of(q, *s, Action::kAsk) + 0.05) <= 0.01);
}

TEST_CASE("single self-loop transition converges to its fixed point") {
  std::mt19937_64 rng(5);
  QNetwork q({16, 1, 32}, {}, rng);
  const auto s = make_state(random_matrix(1, 16, rng, 0.3));
  ReplayMemory memory;
  memory.push({s, Action::kNoAsk, 0.1, s});
  const RewardSpec spec;
  for (int i = 0; i < 500; ++i) q_update(q, memory, 1, spec, rng);
  CHECK(std::abs(q_of(q, *s, Action::kNoAsk) - bellman_target(memory[0], q, spec)) <= 0.01);
}

TEST_CASE("q update: identical batch equals single update, loss is non-negative") {
  std::mt19937_64 rng(6);
  QNetwork a({5, 1, 8}, {}, rng);
  QNetwork b = a;
  const auto s = make_state(random_matrix(1, 5, rng));
  ReplayMemory one, many;
  one.push({s, Action::kAsk, 1.0, s});
  for (int i = 0; i < 8; ++i) many.push({s, Action::kAsk, 1.0, s});
  std::mt19937_64 r1(1), r2(1);
  const auto ra = q_update(a, one, 1, RewardSpec{}, r1);
  const auto rb = q_update(b, many, 8, RewardSpec{}, r2);
  CHECK(ra.loss >= 0.0);
  CHECK(ra.loss == doctest::Approx(rb.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    for (std::size_t j = 0; j < a.parameters()[i]->value.size(); ++j)
      CHECK(std::abs(a.parameters()[i]->value[j] - b.parameters()[i]->value[j]) < 1e-12);

  std::mt19937_64 r3(9);
  ReplayMemory mixed;
  for (int i = 0; i < 40; ++i)
    mixed.push({make_state(random_matrix(1, 5, r3)), i % 2 ? Action::kAsk : Action::kNoAsk, (i % 3) - 1.0,
                i % 4 ? make_state(random_matrix(1, 5, r3)) : nullptr});
  for (int i = 0; i < 30; ++i) CHECK(q_update(a, mixed, 16, RewardSpec{}, r3).loss >= 0.0);

  ReplayMemory empty;
  CHECK_FALSE(q_update(a, empty, 4, RewardSpec{}, r3).updated);
}

TEST_CASE("q update with zero learning rate leaves the network unchanged") {
  std::mt19937_64 rng(7);
  numerics::AdamConfig frozen;
  frozen.learning_rate = 0.0;
  QNetwork q({5, 1, 8}, frozen, rng);
  const auto before = q;
  ReplayMemory memory;
  memory.push({make_state(random_matrix(1, 5, rng)), Action::kAsk, 1.0, nullptr});
  q_update(q, memory, 4, RewardSpec{}, rng);
  for (std::size_t i = 0; i < q.parameters().size(); ++i)
    CHECK(q.parameters()[i]->value == before.parameters()[i]->value);
}

TEST_CASE("degenerate bandits: greedy action follows the better reward") {
  for (bool ask_wins : {false, true}) {
    std::mt19937_64 rng(ask_wins ? 8 : 9);
    QNetwork q({6, 1, 16}, {}, rng);
    q.optimizer().config().learning_rate = 0.01;
    ReplayMemory memory;
    std::vector<StatePtr> states;
    for (int i = 0; i < 50; ++i) {
      states.push_back(make_state(random_matrix(1, 6, rng)));
      memory.push({states.back(), Action::kAsk, -0.05, nullptr});
      memory.push({states.back(), Action::kNoAsk, ask_wins ? -1.0 : 1.0, nullptr});
    }
    for (int i = 0; i < 400; ++i) q_update(q, memory, 32, RewardSpec{}, rng);
    std::size_t asks = 0;
    for (const auto& s : states) asks += select_action(q, *s, 0.0, rng) == Action::kAsk;
    CHECK(asks == (ask_wins ? states.size() : 0));
  }
}

TEST_CASE("epsilon-greedy selection") {
  std::mt19937_64 rng(10);
  QNetwork q({4, 1, 8}, {}, rng);
  const auto s = make_state(random_matrix(1, 4, rng));
  const auto greedy = models::greedy_action(q.forward(s->values));
  for (int i = 0; i < 20; ++i) CHECK(select_action(q, *s, 0.0, rng) == greedy);

  std::size_t asks = 0;
  for (int i = 0; i < 10000; ++i) asks += select_action(q, *s, 1.0, rng) == Action::kAsk;
  CHECK(std::abs(asks / 10000.0 - 0.5) <= 0.02);

  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 200; ++i) CHECK(select_action(q, *s, 0.3, a) == select_action(q, *s, 0.3, b));
  CHECK_THROWS_AS(select_action(q, *s, 1.5, rng), ContractError);
}

TEST_CASE("epsilon schedule decays linearly then holds") {
  const EpsilonSchedule e;
  CHECK(e.at(0, 100) == 1.0);
  CHECK(e.at(25, 100) == doctest::Approx(0.525).epsilon(1e-15));
  CHECK(e.at(50, 100) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(e.at(99, 100) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("replay memory evicts oldest first and samples distinct entries") {
  ReplayMemory m(3);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5; ++i) m.push({make_state(Matrix(1, 1, i)), Action::kAsk, static_cast<double>(i), nullptr});
  CHECK(m.size() == 3);
  CHECK(m[0].reward == 2.0);
  CHECK(m[2].reward == 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto batch = m.sample(3, rng);
    std::sort(batch.begin(), batch.end());
    CHECK(std::adjacent_find(batch.begin(), batch.end()) == batch.end());
  }
  CHECK(m.sample(7, rng).size() == 7);
  CHECK_THROWS_AS(ReplayMemory(0), ContractError);
}

namespace {

fusion::EnsembleOutput uniform_output() {
  return fusion::make_output(std::vector<std::vector<double>>(4, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

fusion::EnsembleOutput one_hot_output() {
  return fusion::make_output({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
}

}  // namespace

TEST_CASE("uncertainty baseline") {
  CHECK(uncertainty_score(uniform_output()) == doctest::Approx(4 * std::log(3.0)).epsilon(1e-14));
  CHECK(uncertainty_score(one_hot_output()) == 0.0);
  std::mt19937_64 rng(12);
  BaselineSelector unc(BaselineSelector::Kind::kUncertainty, 5, 100);
  CHECK(unc.decide(one_hot_output(), rng) == Action::kNoAsk);
  CHECK(unc.decide(uniform_output(), rng) == Action::kAsk);
}

TEST_CASE("uncertainty baseline asks above-average-entropy samples") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> g(0.5, 1.0);
    BaselineSelector unc(BaselineSelector::Kind::kUncertainty, 20, 200);
    double all = 0, asked = 0;
    std::size_t n_asked = 0;
    for (int i = 0; i < 200; ++i) {
      std::vector<std::vector<double>> probs;
      for (int m = 0; m < 4; ++m) {
        std::vector<double> p{g(rng), g(rng), g(rng)};
        const double s = p[0] + p[1] + p[2];
        for (auto& v : p) v /= s;
        probs.push_back(p);
      }
      const auto out = fusion::make_output(probs);
      const double score = uncertainty_score(out);
      all += score;
      if (unc.asked() < 20 && unc.decide(out, rng) == Action::kAsk) {
        asked += score;
        ++n_asked;
      }
    }
    REQUIRE(n_asked > 0);
    CHECK(asked / n_asked > all / 200);
  }
}

TEST_CASE("random baseline") {
  std::mt19937_64 rng(13);
  auto always = BaselineSelector::random_with_probability(1.0, 5, 50);
  for (int i = 0; i < 5; ++i) CHECK(always.decide(uniform_output(), rng) == Action::kAsk);
  BaselineSelector rnd(BaselineSelector::Kind::kRandom, 10, 40);
  CHECK(rnd.ask_probability() == 0.25);
  BaselineSelector full(BaselineSelector::Kind::kRandom, 40, 40);
  CHECK(full.ask_probability() == 1.0);
}
