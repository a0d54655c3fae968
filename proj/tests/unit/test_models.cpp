#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "mmal/errors.hpp"
#include "mmal/models/checkpoint.hpp"
#include "mmal/models/ensemble.hpp"
#include "mmal/models/qnetwork.hpp"
#include "mmal/models/sequence_classifier.hpp"

using namespace mmal;
using namespace mmal::models;
using mmal::testing::random_matrix;

namespace {

SequenceClassifier make_classifier(std::size_t dim, std::size_t steps, std::size_t hidden, bool sigmoid,
                                   std::mt19937_64& rng, double lr = 1e-3, std::size_t classes = 3) {
  ClassifierConfig c;
  c.input_dim = dim;
  c.steps = steps;
  c.hidden = hidden;
  c.num_classes = classes;
  c.sigmoid_head = sigmoid;
  numerics::AdamConfig adam;
  adam.learning_rate = lr;
  return SequenceClassifier(c, adam, rng);
}

std::vector<const Matrix*> pointers(const std::vector<Matrix>& v) {
  std::vector<const Matrix*> out;
  for (const auto& m : v) out.push_back(&m);
  return out;
}

}  // namespace

TEST_CASE("classifier gradients match finite differences") {
  std::mt19937_64 rng(12);
  for (bool sig : {true, false}) {
    auto clf = make_classifier(3, 4, 5, sig, rng);
    for (auto* p : clf.parameters()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.6);
    std::vector<Matrix> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(random_matrix(4, 3, rng));
    const auto batch = pointers(xs);
    const std::vector<std::size_t> labels{2, 0, 1};
    const double err = mmal::testing::max_fd_error(
        clf.parameters(), [&](numerics::Tape& t) { return clf.loss(t, batch, labels); });
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("q-network gradients match finite differences") {
  std::mt19937_64 rng(13);
  for (std::size_t steps : {std::size_t{1}, std::size_t{3}}) {
    QNetwork q({5, steps, 4}, {}, rng);
    for (auto* p : q.parameters()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.6);
    std::vector<Matrix> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(random_matrix(steps, 5, rng));
    const auto batch = pointers(xs);
    const Matrix target = random_matrix(3, 2, rng);
    const double err = mmal::testing::max_fd_error(q.parameters(), [&](numerics::Tape& t) {
      return numerics::mean(numerics::square(numerics::sub(q.scores(t, batch), t.constant(target))));
    });
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("classifier with zero head predicts uniform") {
  std::mt19937_64 rng(1);
  auto clf = make_classifier(4, 5, 6, true, rng);
  clf.head_w.value.fill(0.0);
  clf.head_b.value.fill(0.0);
  const auto pred = clf.predict(random_matrix(5, 4, rng));
  for (double p : pred.probabilities) CHECK(std::abs(p - 1.0 / 3.0) < 1e-15);
  CHECK(pred.label == 0);
}

TEST_CASE("permuting head columns permutes the probabilities") {
  std::mt19937_64 rng(2);
  auto clf = make_classifier(4, 5, 6, true, rng);
  clf.head_b.value = random_matrix(1, 3, rng, 0.3);
  const Matrix x = random_matrix(5, 4, rng);
  const auto base = clf.predict(x).probabilities;
  const std::size_t perm[3] = {2, 0, 1};
  auto permuted = clf;
  for (std::size_t r = 0; r < clf.head_w.value.rows(); ++r)
    for (std::size_t j = 0; j < 3; ++j) permuted.head_w.value(r, j) = clf.head_w.value(r, perm[j]);
  for (std::size_t j = 0; j < 3; ++j) permuted.head_b.value[j] = clf.head_b.value[perm[j]];
  const auto p = permuted.predict(x).probabilities;
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(p[j] - base[perm[j]]) < 1e-15);
}

TEST_CASE("classifier prediction is deterministic and batch-consistent") {
  std::mt19937_64 rng(3);
  auto clf = make_classifier(3, 6, 8, true, rng);
  std::vector<Matrix> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_matrix(6, 3, rng));
  const auto batch = clf.predict_batch(pointers(xs));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto one = clf.predict(xs[i]);
    const auto again = clf.predict(xs[i]);
    CHECK(one.probabilities == again.probabilities);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(one.probabilities[k] - batch[i].probabilities[k]) < 1e-15);
  }
}

TEST_CASE("classifier learns a separable two-class sequence task") {
  std::mt19937_64 rng(4);
  auto clf = make_classifier(2, 5, 16, true, rng, 0.01, 2);
  std::vector<Matrix> xs;
  std::vector<std::size_t> ys;
  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < 40; ++i) {
    const std::size_t y = i % 2;
    Matrix m(5, 2);
    for (std::size_t t = 0; t < 5; ++t) {
      m(t, 0) = (y ? 1.0 : -1.0) + n(rng);
      m(t, 1) = n(rng);
    }
    xs.push_back(m);
    ys.push_back(y);
  }
  ClassifierTrainOptions opts;
  opts.batch_size = 8;
  opts.epochs = 40;
  const auto summary = clf.train(pointers(xs), ys, opts, rng);
  CHECK(summary.optimizer_steps == 200);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) correct += clf.predict(xs[i]).label == ys[i];
  CHECK(static_cast<double>(correct) / xs.size() >= 0.95);
}

TEST_CASE("classifier overfits a single sample") {
  std::mt19937_64 rng(5);
  auto clf = make_classifier(3, 4, 16, false, rng, 0.05);
  const std::vector<Matrix> xs{random_matrix(4, 3, rng)};
  const std::vector<std::size_t> ys{1};
  ClassifierTrainOptions opts;
  opts.epochs = 1;
  std::vector<double> losses;
  for (int e = 0; e < 50; ++e) losses.push_back(clf.train(pointers(xs), ys, opts, rng).final_loss);
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += losses[i];
    late += losses[40 + i];
  }
  CHECK(late < early);
  numerics::Tape tape;
  CHECK(clf.loss(tape, pointers(xs), ys).value()[0] < 0.05);
}

TEST_CASE("sigmoid head bounds the achievable loss") {
  std::mt19937_64 rng(5);
  auto clf = make_classifier(3, 4, 16, true, rng, 0.05);
  const std::vector<Matrix> xs{random_matrix(4, 3, rng)};
  const std::vector<std::size_t> ys{1};
  ClassifierTrainOptions opts;
  opts.epochs = 200;
  clf.train(pointers(xs), ys, opts, rng);
  numerics::Tape tape;
  const double floor = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(clf.loss(tape, pointers(xs), ys).value()[0] >= floor - 1e-12);
}

TEST_CASE("zero epochs leave the classifier bitwise unchanged") {
  std::mt19937_64 rng(6);
  auto clf = make_classifier(3, 4, 5, true, rng);
  const auto before = clf;
  std::vector<Matrix> xs{random_matrix(4, 3, rng)};
  ClassifierTrainOptions opts;
  opts.epochs = 0;
  const auto s = clf.train(pointers(xs), std::vector<std::size_t>{0}, opts, rng);
  CHECK_FALSE(s.trained);
  for (std::size_t i = 0; i < before.parameters().size(); ++i)
    CHECK(clf.parameters()[i]->value == before.parameters()[i]->value);
  CHECK_FALSE(clf.train({}, {}, ClassifierTrainOptions{}, rng).trained);
}

TEST_CASE("contradictory labels converge to the empirical label frequencies") {
  std::mt19937_64 rng(7);
  auto clf = make_classifier(2, 3, 16, false, rng, 0.003);
  clf.head_b.value.fill(1.0);
  const Matrix x = random_matrix(3, 2, rng);
  std::vector<Matrix> xs(10, x);
  const std::vector<std::size_t> ys{0, 0, 0, 0, 0, 0, 1, 1, 1, 2};
  ClassifierTrainOptions opts;
  opts.epochs = 1500;
  opts.batch_size = 10;
  clf.train(pointers(xs), ys, opts, rng);
  const auto p = clf.predict(x).probabilities;
  CHECK(p[0] == doctest::Approx(0.6).epsilon(0.03));
  CHECK(p[1] == doctest::Approx(0.3).epsilon(0.05));
  CHECK(p[2] == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("classifier rejects malformed input") {
  std::mt19937_64 rng(8);
  auto clf = make_classifier(3, 4, 5, true, rng);
  CHECK_THROWS_AS(clf.predict(Matrix(4, 2)), ContractError);
  CHECK_THROWS_AS(clf.predict(Matrix(5, 3)), ContractError);
  const std::vector<Matrix> xs{Matrix(4, 3)};
  ClassifierTrainOptions opts;
  CHECK_THROWS_AS(clf.train(pointers(xs), std::vector<std::size_t>{3}, opts, rng), ContractError);
}

TEST_CASE("q-network with zero head ties and prefers not asking") {
  std::mt19937_64 rng(9);
  QNetwork q({16, 1, 32}, {}, rng);
  q.head_w.value.fill(0.0);
  q.head_b.value.fill(0.0);
  const auto s = q.forward(random_matrix(1, 16, rng));
  CHECK(s[0] == s[1]);
  CHECK(greedy_action(s) == Action::kNoAsk);
  CHECK(greedy_action({0.0, 1e-12}) == Action::kAsk);
  const auto probs = action_probabilities({0.3, -2.0});
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("q-network evaluation is stateless across calls") {
  std::mt19937_64 rng(10);
  QNetwork q({6, 3, 8}, {}, rng);
  const Matrix a = random_matrix(3, 6, rng), b = random_matrix(3, 6, rng);
  const auto first = q.forward(a);
  q.forward(b);
  q.forward(b);
  CHECK(q.forward(a) == first);
  const Matrix* both[] = {&b, &a};
  const auto batch = q.forward_batch(both);
  CHECK(std::abs(batch[1][0] - first[0]) < 1e-15);
  CHECK(std::abs(batch[1][1] - first[1]) < 1e-15);
}

namespace {

data::Dataset tiny_dataset() {
  auto d = data::generate(mmal::testing::tiny_generator());
  return d;
}

std::vector<const data::MultiModalWindow*> all_windows(const data::SubjectSession& s) {
  std::vector<const data::MultiModalWindow*> out;
  for (const auto& w : s.windows) out.push_back(&w);
  return out;
}

}  // namespace

TEST_CASE("fusion modes parse and expand to member views") {
  const auto schema = data::desk_schema();
  CHECK(FusionMode::parse("model", schema).member_views(schema).size() == 4);
  CHECK(FusionMode::parse("model-f", schema).kind ==
        FusionMode::Kind::kModelLevel);
  const auto feature = FusionMode::parse("feature", schema);
  REQUIRE(feature.member_views(schema).size() == 1);
  CHECK(feature.member_views(schema)[0] == std::vector<std::size_t>{0, 1, 2, 3});
  const auto body = FusionMode::parse("body", schema);
  CHECK(body.kind == FusionMode::Kind::kSingleModality);
  CHECK(body.modality == 1);
  CHECK(FusionMode::parse("modality:3", schema).name(schema) == "audio");
  CHECK_THROWS_AS(FusionMode::parse("late", schema), ConfigError);
  CHECK_THROWS_AS(FusionMode::parse("modality:9", schema), ConfigError);
}

TEST_CASE("ensemble predict matches batch predict and classify uses the vote") {
  const auto d = tiny_dataset();
  std::mt19937_64 rng(11);
  for (const char* mode : {"model", "feature", "face"}) {
    ClassifierEnsemble e(d.schema, FusionMode::parse(mode, d.schema), EnsembleConfig{}, rng);
    const auto ws = all_windows(d.test[0]);
    const auto batch = e.predict_batch(ws);
    const auto fused = e.classify(ws);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto one = e.predict(*ws[i]);
      REQUIRE(one.size() == batch[i].size());
      for (std::size_t k = 0; k < one.size(); ++k)
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(std::abs(one.probabilities[k][c] - batch[i].probabilities[k][c]) < 1e-15);
      CHECK(fused[i] == fusion::majority_vote(batch[i]));
    }
  }
}

TEST_CASE("ensemble training on an empty pool is a no-op") {
  const auto d = tiny_dataset();
  std::mt19937_64 rng(12);
  ClassifierEnsemble e(d.schema, FusionMode::model_level(), EnsembleConfig{}, rng);
  const auto copy = e;
  const auto s = e.train({}, rng);
  for (const auto& t : s) CHECK_FALSE(t.trained);
  CHECK(e.members()[0].head_w.value == copy.members()[0].head_w.value);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto d = tiny_dataset();
  std::mt19937_64 rng(13);
  EnsembleConfig cfg;
  cfg.hidden = 7;
  ClassifierEnsemble e(d.schema, FusionMode::model_level(), cfg, rng);
  const auto ws = all_windows(d.train[0]);
  e.train(std::span(ws).first(10), rng);
  QNetwork q({16, 1, 5}, {}, rng);
  ModelBundle bundle{e, q, "mmql-cont0"};

  const auto path = std::filesystem::temp_directory_path() / "mmal_unit_checkpoint.json";
  save_checkpoint(path, bundle);
  const auto loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(loaded.strategy == "mmql-cont0");
  REQUIRE(loaded.policy.has_value());
  CHECK(loaded.ensemble.mode() == e.mode());
  CHECK(loaded.ensemble.schema() == e.schema());
  for (std::size_t k = 0; k < e.size(); ++k)
    for (std::size_t i = 0; i < e.members()[k].parameters().size(); ++i)
      CHECK(loaded.ensemble.members()[k].parameters()[i]->value == e.members()[k].parameters()[i]->value);
  for (std::size_t i = 0; i < q.parameters().size(); ++i)
    CHECK(loaded.policy->parameters()[i]->value == q.parameters()[i]->value);
  const auto a = e.predict_batch(ws), b = loaded.ensemble.predict_batch(ws);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].probabilities == b[i].probabilities);
  CHECK(to_json(loaded) == to_json(bundle));
}

TEST_CASE("checkpoint loading rejects bad content") {
  const auto d = tiny_dataset();
  std::mt19937_64 rng(14);
  ModelBundle bundle{ClassifierEnsemble(d.schema, FusionMode::feature_level(), EnsembleConfig{}, rng), std::nullopt,
                     "rnd"};
  auto j = to_json(bundle);
  CHECK(bundle_from_json(j).policy == std::nullopt);
  auto wrong_version = j;
  wrong_version["version"] = kCheckpointVersion + 1;
  CHECK_THROWS_AS(bundle_from_json(wrong_version), ConfigError);
  auto wrong_format = j;
  wrong_format["format"] = "something-else";
  CHECK_THROWS_AS(bundle_from_json(wrong_format), ConfigError);
  auto truncated = j;
  truncated["ensemble"]["members"][0]["parameters"][0]["value"]["data"].erase(0);
  CHECK_THROWS_AS(bundle_from_json(truncated), ConfigError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.json"), ConfigError);
}
