#include <doctest.h>

#include <sstream>

#include "flyhash/corpus.hpp"
#include "flyhash/error.hpp"

using namespace flyhash;

namespace {

std::vector<std::string> S(std::initializer_list<const char*> xs) {
  return {xs.begin(), xs.end()};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected flyhash::Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("build_vocabulary counts and orders") {
  auto v = build_vocabulary(S({"a", "b", "a", "c", "a", "b"}), 2);
  CHECK(v.tokens() == S({"a", "b"}));
  CHECK(v.counts() == std::vector<std::uint64_t>{3, 2});

  v = build_vocabulary(S({"x"}), 5);
  CHECK(v.tokens() == S({"x"}));
  CHECK(v.counts() == std::vector<std::uint64_t>{1});

  v = build_vocabulary(S({"b", "a", "b", "a"}), 2);
  CHECK(v.tokens() == S({"a", "b"}));
  CHECK(v.find("b") == 1u);
  CHECK_FALSE(v.find("z").has_value());
}

TEST_CASE("build_vocabulary rejects empty input") {
  CHECK(code_of([] { build_vocabulary({}, 3); }) == ErrorCode::kEmptyCorpus);
}

TEST_CASE("Vocabulary validates ordering") {
  CHECK_THROWS_AS(Vocabulary(S({"a", "b"}), {1, 2}), Error);
  CHECK_THROWS_AS(Vocabulary(S({"b", "a"}), {2, 2}), Error);
  CHECK_THROWS_AS(Vocabulary(S({"a", "a"}), {2, 1}), Error);
  CHECK_THROWS_AS(Vocabulary(S({"a"}), {0}), Error);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("The stock market, rose!") == S({"the", "stock", "market", "rose"}));
  CHECK(tokenize("").empty());
  CHECK(tokenize("don't STOP") == S({"don't", "stop"}));
  CHECK(tokenize("  -- ... ").empty());
}

TEST_CASE("split_sentences") {
  auto s = split_sentences("One two.  Three\nfour? Five!");
  CHECK(s == S({"One two.", "Three four?", "Five!"}));
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("no terminator") == S({"no terminator"}));
}

TEST_CASE("sentence_to_wgrams") {
  const Vocabulary v(S({"a", "b", "c", "d"}), {4, 3, 2, 1});
  auto g = sentence_to_wgrams(S({"a", "b", "c", "d"}), 3, v);
  REQUIRE(g.size() == 2);
  CHECK(g[0] == WGram{{0, 2}, 1, 3});
  CHECK(g[1] == WGram{{1, 3}, 2, 3});

  CHECK(sentence_to_wgrams(S({"a", "b"}), 3, v).empty());

  g = sentence_to_wgrams(S({"a", "zzz", "b", "c"}), 3, v);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == WGram{{0, 2}, 1, 3});

  CHECK(code_of([&] { sentence_to_wgrams(S({"a"}), 4, v); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { sentence_to_wgrams(S({"a"}), 1, v); }) == ErrorCode::kConfig);
}

TEST_CASE("encode_wgram") {
  CHECK(encode_wgram({{0, 2}, 1, 3}, 4).active_indices == std::vector<std::uint32_t>{0, 2, 5});
  CHECK(encode_wgram({{3, 3}, 3, 3}, 4).active_indices == std::vector<std::uint32_t>{3, 7});
  CHECK(encode_wgram({{}, 0, 0}, 4).active_indices == std::vector<std::uint32_t>{4});
  CHECK(code_of([] { encode_wgram({{0, 4}, 1, 3}, 4); }) == ErrorCode::kIdOutOfRange);
  CHECK(code_of([] { encode_wgram({{0, 1}, 4, 3}, 4); }) == ErrorCode::kIdOutOfRange);
}

TEST_CASE("occurrence_probabilities") {
  auto p = occurrence_probabilities(Vocabulary(S({"a", "b"}), {3, 1}));
  CHECK(p.p == std::vector<double>{0.75, 0.25, 0.75, 0.25});
  p = occurrence_probabilities(Vocabulary(S({"a"}), {1}));
  CHECK(p.p == std::vector<double>{1.0, 1.0});
  p = occurrence_probabilities(Vocabulary(S({"a", "b", "c", "d"}), {2, 2, 2, 2}));
  for (double x : p.p) CHECK(x == 0.25);
}

TEST_CASE("shuffle_epoch") {
  CHECK(shuffle_epoch(1, 0, 0) == std::vector<std::uint32_t>{0});
  CHECK(shuffle_epoch(50, 3, 9) == shuffle_epoch(50, 3, 9));
  // Frozen against an independent Python xoshiro256** implementation.
  CHECK(shuffle_epoch(10, 0, 1) == std::vector<std::uint32_t>{7, 0, 4, 2, 1, 9, 5, 6, 3, 8});
  CHECK(shuffle_epoch(10, 1, 1) == std::vector<std::uint32_t>{4, 6, 8, 3, 1, 9, 2, 5, 7, 0});
  CHECK(code_of([] { shuffle_epoch(0, 0, 0); }) == ErrorCode::kConfig);
}

TEST_CASE("vocabulary file round trip") {
  const Vocabulary v(S({"the", "a", "bank"}), {9, 4, 4});
  std::stringstream ss;
  write_vocabulary(ss, v);
  CHECK(read_vocabulary(ss) == v);
}

TEST_CASE("sample cache round trip and errors") {
  const Vocabulary v(S({"a", "b", "c", "d"}), {4, 3, 2, 1});
  const auto lines = S({"a b c d", "d c b", "a"});
  SampleCache c{4, 3, encode_corpus(lines, v, 3)};
  CHECK(c.samples.size() == 3);
  const auto bytes = serialize_samples(c);
  const auto back = deserialize_samples(bytes);
  CHECK(back.n_voc == 4);
  CHECK(back.w == 3);
  CHECK(back.samples == c.samples);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { deserialize_samples(bad); }) == ErrorCode::kBadMagic);
  CHECK(code_of([&] { deserialize_samples(bytes.substr(0, bytes.size() - 2)); }) ==
        ErrorCode::kTruncated);
}
