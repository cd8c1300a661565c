#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace flyhash {

using WordId = std::uint32_t;

/// Token <-> id map. Ids are assigned by descending corpus count, ties broken
/// by lexicographic token order, so id 0 is the most frequent word.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Validates ordering, uniqueness and positive counts.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  const std::string& token(WordId id) const { return tokens_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::optional<WordId> find(std::string_view token) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
};

/// Per-input occurrence probabilities, length 2 * n_voc. The target block
/// repeats the context block.
struct ProbabilityVector {
  std::vector<double> p;

  std::size_t vocab_size() const { return p.size() / 2; }
};

struct WGram {
  std::vector<WordId> context_ids;
  WordId target_id = 0;
  std::uint32_t w = 0;

  bool operator==(const WGram&) const = default;
};

/// Sorted active input indices of a binary context-target vector.
struct EncodedSample {
  std::vector<std::uint32_t> active_indices;

  bool operator==(const EncodedSample&) const = default;
};

/// Lowercase, split on whitespace, strip flanking non-alphanumerics.
std::vector<std::string> tokenize(std::string_view line);

/// Splits running text into sentences at [.?!] followed by whitespace.
/// Each sentence is trimmed and whitespace-collapsed; empty ones are dropped.
std::vector<std::string> split_sentences(std::string_view text);

Vocabulary build_vocabulary(std::span<const std::string> tokens, std::size_t n_voc);

/// Raw counts, mergeable across shards before ranking.
using TokenCounts = std::unordered_map<std::string, std::uint64_t>;
void count_tokens(std::span<const std::string> tokens, TokenCounts& counts);
Vocabulary vocabulary_from_counts(const TokenCounts& counts, std::size_t n_voc);

/// Maps tokens to ids, dropping out-of-vocabulary tokens.
std::vector<WordId> to_ids(std::span<const std::string> tokens, const Vocabulary& vocab);

void check_window(std::uint32_t w);

/// One w-gram per full window position after OOV removal.
std::vector<WGram> sentence_to_wgrams(std::span<const std::string> sentence_tokens,
                                      std::uint32_t w, const Vocabulary& vocab);
std::vector<WGram> ids_to_wgrams(std::span<const WordId> ids, std::uint32_t w);

EncodedSample encode_wgram(const WGram& g, std::size_t n_voc);

ProbabilityVector occurrence_probabilities(const Vocabulary& vocab);

/// Deterministic permutation of [0, sample_count) keyed by (seed, epoch).
std::vector<std::uint32_t> shuffle_epoch(std::size_t sample_count, std::uint64_t epoch,
                                         std::uint64_t seed);

/// Compressed row storage for encoded samples.
class SampleSet {
 public:
  SampleSet() { offsets_.push_back(0); }

  void push_back(std::span<const std::uint32_t> active);
  void push_back(const EncodedSample& s) { push_back(s.active_indices); }

  std::size_t size() const { return offsets_.size() - 1; }
  bool empty() const { return size() == 0; }
  std::span<const std::uint32_t> operator[](std::size_t i) const {
    return {indices_.data() + offsets_[i], indices_.data() + offsets_[i + 1]};
  }
  std::size_t total_active() const { return indices_.size(); }
  void reserve(std::size_t samples, std::size_t active);

  bool operator==(const SampleSet&) const = default;

 private:
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint32_t> indices_;
};

/// Tokenize, window and encode every line (one sentence per line).
SampleSet encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab,
                        std::uint32_t w);

// Vocabulary file: "token<TAB>count" per line, line number = id.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Encoded-sample cache, little-endian "FLYG" container.
inline constexpr std::uint32_t kSampleCacheVersion = 1;

struct SampleCache {
  std::uint32_t n_voc = 0;
  std::uint32_t w = 0;
  SampleSet samples;
};

std::string serialize_samples(const SampleCache& cache);
SampleCache deserialize_samples(std::string_view bytes);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace flyhash
