#include <doctest.h>

#include <cmath>
#include <sstream>

#include "flyhash/error.hpp"
#include "flyhash/eval.hpp"
#include "flyhash/rng.hpp"
#include "support/oracles.hpp"

using namespace flyhash;

namespace {

HashCode code(std::vector<UnitId> units, std::size_t K) { return {std::move(units), K}; }

// Six words a..f over K=6 units; context weights are zero so every context
// code equals the target's static code at k=2.
//   a,b -> {0,1}   c,d -> {2,3}   e -> {1,2}   f -> {4,5}
Model toy_model() {
  const std::vector<std::vector<UnitId>> codes{{0, 1}, {0, 1}, {2, 3}, {2, 3}, {1, 2}, {4, 5}};
  WeightMatrix W(6, 6);
  for (WordId id = 0; id < 6; ++id)
    for (auto u : codes[id]) W.at(u, 6 + id) = 1.0f;
  return {W, Vocabulary({"a", "b", "c", "d", "e", "f"}, {6, 5, 4, 3, 2, 1}), {3, 0, 1, 1}};
}

ContextPairRecord rec(const char* x, const char* y, double label) {
  return {{x}, {y}, 0, 0, label};
}

// J at alpha 0.5, q 1: 1.0, 0.5, 0.0, 0.25
std::vector<ContextPairRecord> toy_records() {
  return {rec("a", "a", 1), rec("a", "b", 1), rec("a", "c", 0), rec("c", "e", 0)};
}

DisambiguationConfig toy_config() {
  DisambiguationConfig c;
  c.alpha = 0.5;
  c.q = 1;
  c.k = 2;
  c.w = 3;
  c.theta = 0.0;
  return c;
}

}  // namespace

TEST_CASE("binary_similarity") {
  CHECK(binary_similarity(code({0, 1}, 4), code({0, 1}, 4)) == 1.0);
  CHECK(binary_similarity(code({0, 1}, 4), code({2, 3}, 4)) == 0.0);
  const std::vector<std::uint8_t> a{1, 0, 1, 0}, b{1, 0, 1, 1};
  CHECK(binary_similarity(a, b) == 0.75);
  CHECK(binary_similarity(code({0, 2}, 4), code({0, 2, 3}, 4)) == 0.75);
  CHECK_THROWS_AS(binary_similarity(code({0}, 4), code({0}, 5)), Error);
}

TEST_CASE("spearman hand values") {
  const std::vector<double> x{1, 2, 3};
  CHECK(spearman(x, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3}) ==
        doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 1, 1}), Error);
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), Error);
}

TEST_CASE("spearman matches brute-force average ranks") {
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(21, Stream::kTest, t);
    const std::size_t n = 2 + rng.below(30);
    const bool tied = t % 2 == 0;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = tied ? static_cast<double>(rng.below(5)) : rng.gaussian();
      y[i] = tied ? static_cast<double>(rng.below(5)) : rng.gaussian();
    }
    const auto rx = oracle::brute_ranks(x), ry = oracle::brute_ranks(y);
    if (std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx[0]; }) ||
        std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry[0]; })) {
      CHECK_THROWS_AS(spearman(x, y), Error);
      continue;
    }
    CHECK(std::fabs(spearman(x, y) - oracle::brute_spearman(x, y)) < 1e-12);
  }
}

TEST_CASE("spearman is invariant under monotone transforms") {
  const std::vector<double> x{0.3, 1.5, -2.0, 4.0, 4.0}, y{1, 5, 2, 3, 4};
  std::vector<double> ex;
  for (double v : x) ex.push_back(std::exp(v));
  CHECK(spearman(x, y) == doctest::Approx(spearman(ex, y)).epsilon(1e-14));
}

TEST_CASE("pair file readers") {
  std::istringstream ws("# comment\nBank\tmoney\t7.5\n\nriver\tbank\t3\n");
  const auto w = read_word_pairs(ws);
  REQUIRE(w.size() == 2);
  CHECK(w[0].word1 == "bank");
  CHECK(w[0].human_score == 7.5);

  std::istringstream cs("the bank rose\t1\ta river bank\t2\t1\n");
  const auto c = read_context_pairs(cs);
  REQUIRE(c.size() == 1);
  CHECK(c[0].sentence2.size() == 3);
  CHECK(c[0].target_index2 == 2);
  CHECK(c[0].label == 1.0);

  std::istringstream bad("a b\t5\tc\t0\t1\n");
  CHECK_THROWS_AS(read_context_pairs(bad), Error);
  std::istringstream short_line("a\tb\n");
  CHECK_THROWS_AS(read_word_pairs(short_line), Error);
}

TEST_CASE("evaluate_wordsim") {
  const auto m = toy_model();
  Embedder e(m);
  const std::vector<WordPairRecord> recs{{"a", "b", 3}, {"a", "e", 2}, {"a", "f", 1}, {"a", "zzz", 5}};
  const auto r = evaluate_wordsim(e, recs, 2);
  CHECK(r.rho == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.scored == 3);
  CHECK(r.coverage == 0.75);
  const std::vector<WordPairRecord> oov{{"q", "r", 1}, {"s", "t", 2}};
  try {
    evaluate_wordsim(e, oov, 2);
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kNoScorable);
  }
}

TEST_CASE("nearest_neighbors") {
  const auto m = toy_model();
  Embedder e(m);
  // Duplicate b shares a's code.
  const auto nn = e.nearest_neighbors({{}, 0, 0}, 1, 2);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].word == 1);
  CHECK(nn[0].similarity == 1.0);
  const auto all = e.nearest_neighbors({{}, 4, 0}, 5, 2);
  CHECK(all.size() == 5);
  for (const auto& n : all) CHECK(n.word != 4);
  // e ties with a, b, c, d at 4/6; word id breaks the tie.
  CHECK(all[0].word == 0);
  CHECK(all[3].word == 3);
  CHECK(all[4].word == 5);
}

TEST_CASE("query_wgram truncates at sentence edges and skips OOV") {
  const auto m = toy_model();
  Embedder e(m);
  const std::vector<std::string> s{"a", "zz", "b", "c", "d", "e", "f"};
  auto g = e.query_wgram(s, 3, 5);
  REQUIRE(g.has_value());
  CHECK(g->target_id == 2);
  CHECK(g->context_ids == std::vector<WordId>{0, 1, 3, 4});
  g = e.query_wgram(s, 0, 5);
  REQUIRE(g.has_value());
  CHECK(g->context_ids == std::vector<WordId>{1, 2});
  CHECK_FALSE(e.query_wgram(s, 1, 5).has_value());
  CHECK(e.query_wgram(s, 3, 0)->context_ids.empty());
}

TEST_CASE("disambiguation_score") {
  const auto m = toy_model();
  Embedder e(m);
  auto cfg = toy_config();
  const auto recs = toy_records();
  const std::vector<double> want{1.0, 0.5, 0.0, 0.25};
  for (std::size_t i = 0; i < recs.size(); ++i)
    CHECK(disambiguation_score(e, recs[i], cfg).value() == want[i]);
  for (double alpha : {0.0, 0.3, 1.0}) {
    cfg.alpha = alpha;
    CHECK(disambiguation_score(e, recs[0], cfg).value() == 1.0);
  }
  cfg.alpha = 1.0;
  CHECK(disambiguation_score(e, recs[3], cfg).value() == 0.5);
  cfg.alpha = 0.0;
  CHECK(disambiguation_score(e, recs[2], cfg).value() == 0.0);
  CHECK_FALSE(disambiguation_score(e, rec("a", "zzz", 1), cfg).has_value());
}

TEST_CASE("evaluate_wic") {
  const auto m = toy_model();
  Embedder e(m);
  auto cfg = toy_config();
  const auto recs = toy_records();
  cfg.theta = -1;
  CHECK(evaluate_wic(e, recs, cfg).metric == 0.5);
  cfg.theta = 2;
  CHECK(evaluate_wic(e, recs, cfg).metric == 0.5);
  cfg.theta = 0.25;
  const auto r = evaluate_wic(e, recs, cfg);
  CHECK(r.metric == 1.0);
  CHECK(r.scored == 4);
  const std::vector<ContextPairRecord> none{rec("zzz", "a", 1)};
  CHECK_THROWS_AS(evaluate_wic(e, none, cfg), Error);
}

TEST_CASE("evaluate_scws") {
  const auto m = toy_model();
  Embedder e(m);
  auto cfg = toy_config();
  auto recs = toy_records();
  const std::vector<double> human{4, 3, 2, 1};
  for (std::size_t i = 0; i < 4; ++i) recs[i].label = human[i];
  cfg.theta = -1;
  CHECK(evaluate_scws(e, recs, cfg).metric ==
        doctest::Approx(oracle::brute_spearman({1.0, 0.5, 0.0, 0.25}, human)).epsilon(1e-15));
  // Scores at or below theta become zero: [1, 0.5, 0, 0].
  cfg.theta = 0.25;
  CHECK(evaluate_scws(e, recs, cfg).metric ==
        doctest::Approx(oracle::brute_spearman({1.0, 0.5, 0.0, 0.0}, human)).epsilon(1e-15));
  cfg.theta = 1.0;
  CHECK_THROWS_AS(evaluate_scws(e, recs, cfg), Error);
}

TEST_CASE("tune") {
  const auto m = toy_model();
  Embedder e(m);
  const auto recs = toy_records();
  TuningGrid g;
  g.thetas = {0.0};
  g.alphas = {0.5};
  g.qs = {1};
  g.ks = {2};
  g.ws = {3};
  auto r = tune(ContextTask::kWic, e, recs, g);
  CHECK(r.config.theta == 0.0);
  CHECK(r.metric == 0.75);

  g.thetas = {-1, 0.25, 0.6, 2};
  r = tune(ContextTask::kWic, e, recs, g);
  CHECK(r.config.theta == 0.25);
  CHECK(r.metric == 1.0);

  g.thetas = {0.3, 0.25, 0.4};
  r = tune(ContextTask::kWic, e, recs, g);
  CHECK(r.config.theta == 0.3);
}

TEST_CASE("cross_validate") {
  const auto m = toy_model();
  Embedder e(m);
  TuningGrid g;
  g.thetas = {-1, 0.25, 2};
  g.qs = {1};
  g.ks = {2};
  g.ws = {3};

  std::vector<ContextPairRecord> same(10, rec("a", "a", 1));
  auto r = cross_validate(ContextTask::kWic, e, same, 5, g);
  CHECK(r.folds.size() == 5);
  CHECK(r.stddev == 0.0);
  CHECK(r.mean == 1.0);

  auto five = toy_records();
  five.push_back(rec("a", "f", 0));
  r = cross_validate(ContextTask::kWic, e, five, 5, g);
  REQUIRE(r.folds.size() == 5);
  for (const auto& f : r.folds) CHECK(f.test_scored == 4);

  // 10 records (toy set twice plus two extra); fold accuracies worked by
  // hand: .375 .875 .875 .375 .375.
  auto ten = toy_records();
  for (auto& x : toy_records()) ten.push_back(x);
  ten.push_back(rec("e", "f", 0));
  ten.push_back(rec("b", "a", 1));
  r = cross_validate(ContextTask::kWic, e, ten, 5, g);
  double mean = 0.0;
  for (const auto& f : r.folds) mean += f.test_metric / 5.0;
  CHECK(r.mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(r.mean == doctest::Approx(0.575).epsilon(1e-12));
  CHECK(r.stddev == doctest::Approx(std::sqrt(0.06)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_validate(ContextTask::kWic, e, toy_records(), 5, g), Error);
  CHECK_THROWS_AS(cross_validate(ContextTask::kWic, e, toy_records(), 1, g), Error);
}

TEST_CASE("agglomerative_cluster small cases") {
  const std::vector<BinaryCode> pts{{1, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 1, 1}, {0, 0, 0, 1}};
  CHECK(agglomerative_cluster(pts, 4) == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(agglomerative_cluster(pts, 1) == std::vector<std::uint32_t>{0, 0, 0, 0});
  CHECK(agglomerative_cluster(pts, 2) == std::vector<std::uint32_t>{0, 0, 1, 1});
  CHECK_THROWS_AS(agglomerative_cluster(pts, 5), Error);
  CHECK_THROWS_AS(agglomerative_cluster(pts, 0), Error);
  const std::vector<BinaryCode> zero{{1, 0}, {0, 0}};
  CHECK_THROWS_AS(agglomerative_cluster(zero, 1), Error);
}

TEST_CASE("agglomerative_cluster matches exhaustive complete link") {
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(31, Stream::kTest, t);
    const std::size_t n = 1 + rng.below(8);
    const std::size_t dim = 3 + rng.below(6);
    std::vector<BinaryCode> pts(n, BinaryCode(dim));
    for (auto& p : pts) {
      for (auto& b : p) b = rng.below(2) ? 1 : 0;
      p[rng.below(dim)] = 1;
    }
    for (std::size_t C = 1; C <= n; ++C)
      CHECK(agglomerative_cluster(pts, C) == oracle::brute_complete_link(pts, C));
  }
}

TEST_CASE("cluster_quality") {
  const std::vector<BinaryCode> same(3, BinaryCode{1, 0, 1});
  auto q = cluster_quality(same, std::vector<std::uint32_t>{0, 1, 1});
  for (double v : q.intra) CHECK(v == 1.0);

  const std::vector<BinaryCode> orth{{1, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 1, 1}, {0, 0, 0, 1}};
  q = cluster_quality(orth, std::vector<std::uint32_t>{0, 0, 1, 1});
  CHECK(q.inter == std::vector<double>{0.0, 0.0});

  // Six points, three clusters; values from brute-force pairwise cosines.
  const std::vector<BinaryCode> six{{1, 1, 0, 0}, {1, 1, 1, 0}, {0, 1, 1, 1},
                                    {0, 0, 1, 1}, {1, 0, 0, 1}, {1, 0, 0, 0}};
  q = cluster_quality(six, std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2});
  const std::vector<double> intra{0.8164965809277261, 0.8164965809277261, 0.7071067811865475};
  const std::vector<double> inter{0.7071067811865475, 0.6666666666666666, 0.7071067811865475};
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(q.intra[c] == doctest::Approx(intra[c]).epsilon(1e-15));
    CHECK(q.inter[c] == doctest::Approx(inter[c]).epsilon(1e-15));
  }
  CHECK(q.intra_mean == doctest::Approx(0.7800333143473331).epsilon(1e-15));
  CHECK(q.intra_std == doctest::Approx(0.05156684612641726).epsilon(1e-13));
  CHECK(q.inter_mean == doctest::Approx(0.6936267430132538).epsilon(1e-15));
  CHECK(q.inter_std == doctest::Approx(0.019063652805978864).epsilon(1e-13));

  q = cluster_quality(six, std::vector<std::uint32_t>{0, 0, 0, 0, 0, 0});
  CHECK(q.inter == std::vector<double>{0.0});
}

TEST_CASE("binarize_topk") {
  const std::vector<std::vector<double>> v{{3, 1, 2}, {1, 1, 0}};
  auto b = binarize_topk(v, 1);
  CHECK(b[0] == BinaryCode{1, 0, 0});
  CHECK(b[1] == BinaryCode{1, 0, 0});
  b = binarize_topk(v, 3);
  CHECK(b[0] == BinaryCode{1, 1, 1});
  CHECK_THROWS_AS(binarize_topk(v, 4), Error);
  CHECK_THROWS_AS(binarize_topk(v, 0), Error);
}
