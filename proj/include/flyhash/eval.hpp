#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flyhash/corpus.hpp"
#include "flyhash/model.hpp"

namespace flyhash {

using BinaryCode = std::vector<std::uint8_t>;

/// (n11 + n00) / n.
double binary_similarity(const HashCode& a, const HashCode& b);
double binary_similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Pearson correlation of average ranks. Throws kUndefined for constant input.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

struct WordPairRecord {
  std::string word1;
  std::string word2;
  double human_score = 0.0;
};

struct ContextPairRecord {
  /// Whitespace-separated tokens; target indices refer to these positions.
  std::vector<std::string> sentence1;
  std::vector<std::string> sentence2;
  std::size_t target_index1 = 0;
  std::size_t target_index2 = 0;
  double label = 0.0;
};

std::vector<WordPairRecord> read_word_pairs(std::istream& in);
std::vector<WordPairRecord> read_word_pairs(const std::filesystem::path& path);
std::vector<ContextPairRecord> read_context_pairs(std::istream& in);
std::vector<ContextPairRecord> read_context_pairs(const std::filesystem::path& path);

/// Static codes for the whole vocabulary, computed once per hash length.
class Embedder {
 public:
  explicit Embedder(const Model& model) : model_(model) {}

  const Model& model() const { return model_; }
  const std::vector<HashCode>& static_codes(std::size_t k);

  /// Window of up to (w-1)/2 in-vocabulary words on each side of the target,
  /// truncated at sentence edges. w = 0 gives an empty context. Returns
  /// nullopt when the target is out of vocabulary or out of range.
  std::optional<WGram> query_wgram(std::span<const std::string> sentence,
                                   std::size_t target_index, std::uint32_t w) const;

  struct Neighbor {
    WordId word = 0;
    double similarity = 0.0;
  };

  /// Vocabulary words ranked by similarity of their static code to the
  /// query's context code, ties by word id, excluding the query target.
  std::vector<Neighbor> nearest_neighbors(const WGram& query, std::size_t q, std::size_t k);

 private:
  const Model& model_;
  std::map<std::size_t, std::vector<HashCode>> static_codes_;
};

struct WordSimResult {
  double rho = 0.0;
  double coverage = 0.0;
  std::size_t scored = 0;
};

WordSimResult evaluate_wordsim(Embedder& embedder, std::span<const WordPairRecord> records,
                               std::size_t k);

struct DisambiguationConfig {
  double alpha = 0.5;
  std::uint32_t q = 10;
  double theta = 0.0;
  std::uint32_t k = 16;
  std::uint32_t w = 11;

  void validate() const;
  bool operator==(const DisambiguationConfig&) const = default;
};

/// J_dot = |h1 & h2| / k and J_nn = |NN1 & NN2| / q for one record.
struct ScoreComponents {
  double dot = 0.0;
  double nn = 0.0;
};

std::optional<ScoreComponents> score_components(Embedder& embedder,
                                                const ContextPairRecord& rec,
                                                std::uint32_t k, std::uint32_t w,
                                                std::uint32_t q);

inline double combine_score(const ScoreComponents& c, double alpha) {
  return alpha * c.dot + (1.0 - alpha) * c.nn;
}

/// J = alpha * J_dot + (1 - alpha) * J_nn, or nullopt when a target is OOV.
std::optional<double> disambiguation_score(Embedder& embedder, const ContextPairRecord& rec,
                                           const DisambiguationConfig& cfg);

enum class ContextTask { kWic, kScws };

struct TaskResult {
  double metric = 0.0;
  std::size_t scored = 0;
  std::size_t total = 0;
};

/// Accuracy of predicting "same sense" when J > theta.
TaskResult evaluate_wic(Embedder& embedder, std::span<const ContextPairRecord> records,
                        const DisambiguationConfig& cfg);
/// Spearman between human scores and J (zeroed where J <= theta).
TaskResult evaluate_scws(Embedder& embedder, std::span<const ContextPairRecord> records,
                         const DisambiguationConfig& cfg);
TaskResult evaluate_task(ContextTask task, Embedder& embedder,
                         std::span<const ContextPairRecord> records,
                         const DisambiguationConfig& cfg);

/// Grid axes. Enumeration order is k, w, q, alpha, theta with theta fastest.
struct TuningGrid {
  std::vector<double> thetas{0.0};
  std::vector<double> alphas{0.5};
  std::vector<std::uint32_t> qs{10};
  std::vector<std::uint32_t> ks{16};
  std::vector<std::uint32_t> ws{11};

  std::size_t size() const {
    return thetas.size() * alphas.size() * qs.size() * ks.size() * ws.size();
  }
};

struct TuneResult {
  DisambiguationConfig config;
  double metric = 0.0;
};

/// Exhaustive search; the first grid point wins ties.
TuneResult tune(ContextTask task, Embedder& embedder, std::span<const ContextPairRecord> dev,
                const TuningGrid& grid);

struct FoldResult {
  DisambiguationConfig config;
  double dev_metric = 0.0;
  double test_metric = 0.0;
  std::size_t test_scored = 0;
};

struct CrossValidationResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<FoldResult> folds;
};

/// Record i goes to fold i % folds. Each fold is the dev set in turn and the
/// metric is measured on the remaining records. Population std over folds.
CrossValidationResult cross_validate(ContextTask task, Embedder& embedder,
                                     std::span<const ContextPairRecord> records,
                                     std::size_t folds, const TuningGrid& grid);

/// Complete-linkage clustering on cosine distance, stopped at `clusters`
/// clusters. Returns labels 0..clusters-1 ordered by smallest member index.
std::vector<std::uint32_t> agglomerative_cluster(std::span<const BinaryCode> codes,
                                                 std::size_t clusters);

struct ClusterQuality {
  std::vector<double> intra;
  std::vector<double> inter;
  double intra_mean = 0.0;
  double intra_std = 0.0;
  double inter_mean = 0.0;
  double inter_std = 0.0;
};

ClusterQuality cluster_quality(std::span<const BinaryCode> codes,
                               std::span<const std::uint32_t> assignment);

/// Static codes of the `max_words` most frequent words, clustered and scored.
struct VocabularyClusters {
  std::vector<WordId> words;
  std::vector<std::uint32_t> assignment;
  ClusterQuality quality;
};
VocabularyClusters cluster_vocabulary(Embedder& embedder, std::size_t clusters, std::size_t k,
                                      std::size_t max_words);

double cosine_similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Top-k entries per row set to 1, ties at rank k to the smallest index.
std::vector<BinaryCode> binarize_topk(std::span<const std::vector<double>> vectors,
                                      std::size_t k);

}  // namespace flyhash
