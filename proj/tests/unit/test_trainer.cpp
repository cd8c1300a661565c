#include <doctest.h>

#include <cmath>

#include "flyhash/error.hpp"
#include "flyhash/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace flyhash;

namespace {

TrainingConfig small_config() {
  TrainingConfig c;
  c.units = 12;
  c.w = 3;
  c.n_voc = 0;
  c.epochs = 3;
  c.lr0 = 1e-3;
  c.minibatch = 7;
  c.seed = 4;
  c.probe_size = 50;
  return c;
}

}  // namespace

TEST_CASE("learning_rate schedule") {
  TrainingConfig c;
  c.lr0 = 0.3;
  c.epochs = 15;
  CHECK(learning_rate(0, c) == 0.3);
  CHECK(learning_rate(14, c) == doctest::Approx(0.3 / 15).epsilon(1e-15));
  for (std::uint32_t e = 1; e < 15; ++e) CHECK(learning_rate(e, c) < learning_rate(e - 1, c));
  CHECK_THROWS_AS(learning_rate(15, c), Error);
}

TEST_CASE("zero epochs is nothing to train") {
  TrainingConfig c;
  c.epochs = 0;
  try {
    c.validate();
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNothingToTrain);
    CHECK(std::string(e.what()) == "nothing to train");
  }
}

TEST_CASE("spherical K-means limit on one repeated sample") {
  // Uniform p over 4 words; every sample is the same w-gram.
  const Vocabulary vocab({"a", "b", "c", "d"}, {2, 2, 2, 2});
  const auto p = occurrence_probabilities(vocab);
  SampleSet samples;
  const auto s = encode_wgram({{0, 2}, 1, 3}, 4);
  for (int i = 0; i < 20; ++i) samples.push_back(s);
  TrainingConfig c;
  c.units = 3;
  c.w = 3;
  c.n_voc = 4;
  c.epochs = 200;
  c.lr0 = 0.05;
  c.minibatch = 1;
  c.seed = 1;
  const auto r = train(samples, p, c);
  const UnitId mu = winner(activations(r.weights, s.active_indices));
  CHECK(std::fabs(row_norm(r.weights, mu) - 1.0) < 1e-6);
  const double inv = 1.0 / std::sqrt(3.0);
  for (std::size_t i = 0; i < 8; ++i) {
    const bool on = i == 0 || i == 2 || i == 5;
    CHECK(std::fabs(r.weights.at(mu, i) - (on ? inv : 0.0)) < 1e-6);
  }
}

TEST_CASE("eps0 = 0 leaves weights unchanged") {
  auto data = prepare_training_data(testing::two_topic_corpus(100, 2), 1000, 3);
  auto c = small_config();
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  c.lr0 = 0.0;
  const auto r = train(data.samples, data.p, c);
  CHECK(r.weights == init_weights(c.units, c.n_voc, c.seed));
}

TEST_CASE("minibatch applies the sum of per-sample deltas against frozen weights") {
  auto data = prepare_training_data(testing::two_topic_corpus(20, 5, 6), 1000, 3);
  auto c = small_config();
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  Trainer trainer(c, data.samples, data.p);
  WeightMatrix W = init_weights(c.units, c.n_voc, c.seed);
  oracle::Dense D(c.units, std::vector<double>(W.inputs()));
  for (UnitId mu = 0; mu < c.units; ++mu)
    for (std::size_t i = 0; i < W.inputs(); ++i) D[mu][i] = W.at(mu, i);

  const double lr = 1e-3;
  std::vector<std::uint32_t> batch{0, 3, 5, 1, 8, 2, 3};
  oracle::Dense want = D;
  for (auto b : batch) {
    const std::vector<std::uint32_t> act(data.samples[b].begin(), data.samples[b].end());
    const auto d = oracle::dense_delta(D, oracle::dense_sample(act, W.inputs()), data.p.p, lr);
    for (std::size_t mu = 0; mu < D.size(); ++mu)
      for (std::size_t i = 0; i < W.inputs(); ++i) want[mu][i] += d[mu][i];
  }
  trainer.apply_minibatch(W, batch, lr);
  double err = 0.0;
  for (UnitId mu = 0; mu < c.units; ++mu)
    for (std::size_t i = 0; i < W.inputs(); ++i)
      err = std::max(err, std::fabs(W.at(mu, i) - want[mu][i]) / std::max(1.0, std::fabs(want[mu][i])));
  CHECK(err < 1e-6);
}

TEST_CASE("worker count does not change results") {
  auto data = prepare_training_data(testing::two_topic_corpus(400, 3), 1000, 5);
  auto c = small_config();
  c.w = 5;
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  c.minibatch = 64;
  c.lr0 = 1e-4;
  c.workers = 1;
  const auto a = train(data.samples, data.p, c);
  c.workers = 3;
  const auto b = train(data.samples, data.p, c);
  CHECK(a.weights == b.weights);
  CHECK(a.weights == train(data.samples, data.p, c).weights);
  for (std::size_t e = 0; e < a.reports.size(); ++e) CHECK(a.reports[e].energy == b.reports[e].energy);
}

TEST_CASE("probe energy equals energy over probe size and stays finite") {
  auto data = prepare_training_data(testing::two_topic_corpus(200, 8), 1000, 3);
  auto c = small_config();
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  Trainer trainer(c, data.samples, data.p);
  const auto W = init_weights(c.units, c.n_voc, c.seed);
  CHECK(probe_energy(W, trainer.probe(), data.p) ==
        energy(W, trainer.probe(), data.p) / static_cast<double>(trainer.probe().size()));
  WeightMatrix W2 = W;
  for (const auto& r : trainer.run(W2)) CHECK(std::isfinite(r.energy));
}

TEST_CASE("divergence is reported as non-finite") {
  auto data = prepare_training_data(testing::two_topic_corpus(400, 8), 1000, 3);
  auto c = small_config();
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  c.lr0 = 10.0;
  c.minibatch = 400;
  try {
    train(data.samples, data.p, c);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
  }
}

TEST_CASE("max-norm scaling bounds every step") {
  auto data = prepare_training_data(testing::two_topic_corpus(200, 8), 1000, 3);
  auto c = small_config();
  c.n_voc = static_cast<std::uint32_t>(data.vocab.size());
  c.scaling = UpdateScaling::kMaxNorm;
  c.lr0 = 0.01;
  Trainer trainer(c, data.samples, data.p);
  WeightMatrix W = init_weights(c.units, c.n_voc, c.seed);
  const WeightMatrix before = W;
  std::vector<std::uint32_t> batch{0, 1, 2, 3};
  trainer.apply_minibatch(W, batch, 0.01);
  double mx = 0.0;
  for (std::size_t j = 0; j < W.raw().size(); ++j)
    mx = std::max(mx, static_cast<double>(std::fabs(W.raw()[j] - before.raw()[j])));
  CHECK(mx == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("benchmark_scaling returns one row per point") {
  const auto lines = testing::two_topic_corpus(200, 1);
  TrainingConfig base;
  base.w = 3;
  base.lr0 = 1e-5;
  base.minibatch = 50;
  std::vector<ScalingPoint> grid{{8, 100, 300}, {16, 100, 300}};
  const auto rows = benchmark_scaling(lines, base, grid, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].point.units == 16);
  CHECK(rows[0].seconds_per_epoch >= 0.0);
}
