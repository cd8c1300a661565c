#include "flyhash/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "flyhash/error.hpp"

namespace flyhash {

namespace {

std::size_t intersection_size(std::span<const UnitId> a, std::span<const UnitId> b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (;;) {
    const auto t = line.find('\t', b);
    out.push_back(line.substr(b, t == std::string::npos ? std::string::npos : t - b));
    if (t == std::string::npos) break;
    b = t + 1;
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& text, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kConfig, "bad number '" + text + "' on line " + std::to_string(lineno));
  }
}

std::size_t parse_index(const std::string& text, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("bad");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kConfig, "bad index '" + text + "' on line " + std::to_string(lineno));
  }
}

bool skip_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto first = line.find_first_not_of(" \t");
  return first == std::string::npos || line[first] == '#';
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return in;
}

/// Single normalized token, or the lowercased raw word if it does not
/// tokenize to exactly one token (it will then be out of vocabulary).
std::string normalize_word(const std::string& word) {
  auto toks = tokenize(word);
  if (toks.size() == 1) return toks.front();
  return word;
}

void mean_std(std::span<const double> xs, double& mean, double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  stddev = std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

double binary_similarity(const HashCode& a, const HashCode& b) {
  if (a.K != b.K) throw Error(ErrorCode::kLengthMismatch, "hash codes have different lengths");
  if (a.K == 0) throw Error(ErrorCode::kLengthMismatch, "empty hash codes");
  const std::size_t n11 = intersection_size(a.active_units, b.active_units);
  const std::size_t uni = a.active_units.size() + b.active_units.size() - n11;
  const std::size_t n00 = a.K - uni;
  return static_cast<double>(n11 + n00) / static_cast<double>(a.K);
}

double binary_similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kLengthMismatch, "vectors differ in length");
  if (a.empty()) throw Error(ErrorCode::kLengthMismatch, "empty vectors");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += (a[i] != 0) == (b[i] != 0);
  return static_cast<double>(same) / static_cast<double>(a.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 share the mean of ranks i+1..j.
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "sequences differ in length");
  if (x.size() < 2) throw Error(ErrorCode::kUndefined, "spearman needs at least two values");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorCode::kUndefined, "spearman undefined for a constant sequence");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<WordPairRecord> read_word_pairs(std::istream& in) {
  std::vector<WordPairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3)
      throw Error(ErrorCode::kConfig, "expected 3 tab-separated fields on line " +
                                          std::to_string(lineno));
    out.push_back({normalize_word(f[0]), normalize_word(f[1]), parse_double(f[2], lineno)});
  }
  return out;
}

std::vector<WordPairRecord> read_word_pairs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_word_pairs(in);
}

std::vector<ContextPairRecord> read_context_pairs(std::istream& in) {
  std::vector<ContextPairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5)
      throw Error(ErrorCode::kConfig, "expected 5 tab-separated fields on line " +
                                          std::to_string(lineno));
    ContextPairRecord r;
    r.sentence1 = split_whitespace(f[0]);
    r.target_index1 = parse_index(f[1], lineno);
    r.sentence2 = split_whitespace(f[2]);
    r.target_index2 = parse_index(f[3], lineno);
    r.label = parse_double(f[4], lineno);
    if (r.target_index1 >= r.sentence1.size() || r.target_index2 >= r.sentence2.size())
      throw Error(ErrorCode::kIdOutOfRange, "target index out of range on line " +
                                                std::to_string(lineno));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ContextPairRecord> read_context_pairs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_context_pairs(in);
}

const std::vector<HashCode>& Embedder::static_codes(std::size_t k) {
  auto it = static_codes_.find(k);
  if (it != static_codes_.end()) return it->second;
  const auto& W = model_.weights;
  if (k == 0 || k > W.units())
    throw Error(ErrorCode::kConfig, "hash length k=" + std::to_string(k) + " outside [1, K]");
  std::vector<HashCode> codes(W.vocab_size());
  std::vector<double> acts(W.units());
  for (std::size_t j = 0; j < codes.size(); ++j) {
    const auto col = W.column(W.vocab_size() + j);
    std::copy(col.begin(), col.end(), acts.begin());
    codes[j] = hash_activations(acts, k);
  }
  return static_codes_.emplace(k, std::move(codes)).first->second;
}

std::optional<WGram> Embedder::query_wgram(std::span<const std::string> sentence,
                                           std::size_t target_index, std::uint32_t w) const {
  if (w != 0) check_window(w);
  if (target_index >= sentence.size()) return std::nullopt;
  const auto& vocab = model_.vocab;
  auto lookup = [&](const std::string& raw) -> std::optional<WordId> {
    const auto toks = tokenize(raw);
    if (toks.size() != 1) return std::nullopt;
    return vocab.find(toks.front());
  };
  const auto target = lookup(sentence[target_index]);
  if (!target) return std::nullopt;
  WGram g;
  g.target_id = *target;
  g.w = w;
  if (w == 0) return g;
  const std::size_t half = (w - 1) / 2;
  std::size_t taken = 0;
  for (std::size_t i = target_index; i-- > 0 && taken < half;) {
    if (auto id = lookup(sentence[i])) {
      g.context_ids.push_back(*id);
      ++taken;
    }
  }
  std::reverse(g.context_ids.begin(), g.context_ids.end());
  taken = 0;
  for (std::size_t i = target_index + 1; i < sentence.size() && taken < half; ++i) {
    if (auto id = lookup(sentence[i])) {
      g.context_ids.push_back(*id);
      ++taken;
    }
  }
  return g;
}

std::vector<Embedder::Neighbor> Embedder::nearest_neighbors(const WGram& query, std::size_t q,
                                                            std::size_t k) {
  const auto& W = model_.weights;
  const auto h = context_embedding(W, query, k);
  const auto& codes = static_codes(k);
  std::vector<std::uint8_t> mask(W.units(), 0);
  for (auto u : h.active_units) mask[u] = 1;
  // All codes have cardinality k, so similarity is monotone in the overlap.
  std::vector<std::pair<std::uint32_t, WordId>> ranked;
  ranked.reserve(codes.size());
  for (std::size_t j = 0; j < codes.size(); ++j) {
    if (j == query.target_id) continue;
    std::uint32_t overlap = 0;
    for (auto u : codes[j].active_units) overlap += mask[u];
    ranked.emplace_back(overlap, static_cast<WordId>(j));
  }
  const std::size_t take = std::min(q, ranked.size());
  auto before = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                    ranked.end(), before);
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({ranked[i].second, binary_similarity(h, codes[ranked[i].second])});
  return out;
}

WordSimResult evaluate_wordsim(Embedder& embedder, std::span<const WordPairRecord> records,
                               std::size_t k) {
  const auto& codes = embedder.static_codes(k);
  const auto& vocab = embedder.model().vocab;
  std::vector<double> model_scores;
  std::vector<double> human;
  for (const auto& r : records) {
    const auto a = vocab.find(r.word1);
    const auto b = vocab.find(r.word2);
    if (!a || !b) continue;
    model_scores.push_back(binary_similarity(codes[*a], codes[*b]));
    human.push_back(r.human_score);
  }
  if (model_scores.empty()) throw Error(ErrorCode::kNoScorable, "no scorable word pairs");
  WordSimResult out;
  out.scored = model_scores.size();
  out.coverage = static_cast<double>(out.scored) / static_cast<double>(records.size());
  out.rho = spearman(model_scores, human);
  return out;
}

void DisambiguationConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kConfig, "alpha must lie in [0, 1]");
  if (q == 0) throw Error(ErrorCode::kConfig, "q must be at least 1");
  if (k == 0) throw Error(ErrorCode::kConfig, "k must be at least 1");
  if (w != 0) check_window(w);
}

std::optional<ScoreComponents> score_components(Embedder& embedder,
                                                const ContextPairRecord& rec,
                                                std::uint32_t k, std::uint32_t w,
                                                std::uint32_t q) {
  const auto g1 = embedder.query_wgram(rec.sentence1, rec.target_index1, w);
  const auto g2 = embedder.query_wgram(rec.sentence2, rec.target_index2, w);
  if (!g1 || !g2) return std::nullopt;
  const auto& W = embedder.model().weights;
  const auto h1 = context_embedding(W, *g1, k);
  const auto h2 = context_embedding(W, *g2, k);
  ScoreComponents c;
  c.dot = static_cast<double>(intersection_size(h1.active_units, h2.active_units)) /
          static_cast<double>(k);
  auto ids = [&](const WGram& g) {
    std::vector<WordId> out;
    for (const auto& n : embedder.nearest_neighbors(g, q, k)) out.push_back(n.word);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto n1 = ids(*g1);
  const auto n2 = ids(*g2);
  std::vector<WordId> common;
  std::set_intersection(n1.begin(), n1.end(), n2.begin(), n2.end(), std::back_inserter(common));
  c.nn = static_cast<double>(common.size()) / static_cast<double>(q);
  return c;
}

std::optional<double> disambiguation_score(Embedder& embedder, const ContextPairRecord& rec,
                                           const DisambiguationConfig& cfg) {
  cfg.validate();
  const auto c = score_components(embedder, rec, cfg.k, cfg.w, cfg.q);
  if (!c) return std::nullopt;
  return combine_score(*c, cfg.alpha);
}

namespace {

/// Task metric over precomputed components; throws kNoScorable / kUndefined.
double task_metric(ContextTask task, std::span<const std::optional<ScoreComponents>> comps,
                   std::span<const double> labels, double alpha, double theta,
                   std::size_t* scored_out = nullptr) {
  std::vector<double> model_scores;
  std::vector<double> human;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (!comps[i]) continue;
    const double j = combine_score(*comps[i], alpha);
    if (task == ContextTask::kWic) {
      const bool predicted = j > theta;
      const bool actual = labels[i] >= 0.5;
      correct += predicted == actual;
    } else {
      model_scores.push_back(j > theta ? j : 0.0);
    }
    human.push_back(labels[i]);
  }
  if (scored_out) *scored_out = human.size();
  if (human.empty()) throw Error(ErrorCode::kNoScorable, "no scorable records");
  if (task == ContextTask::kWic)
    return static_cast<double>(correct) / static_cast<double>(human.size());
  return spearman(model_scores, human);
}

/// Lazily computed components for every record, per (k, w, q).
class ComponentCache {
 public:
  ComponentCache(Embedder& embedder, std::span<const ContextPairRecord> records)
      : embedder_(embedder), records_(records) {}

  const std::vector<std::optional<ScoreComponents>>& get(std::uint32_t k, std::uint32_t w,
                                                         std::uint32_t q) {
    const auto key = std::make_tuple(k, w, q);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<std::optional<ScoreComponents>> comps(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
      comps[i] = score_components(embedder_, records_[i], k, w, q);
    return cache_.emplace(key, std::move(comps)).first->second;
  }

 private:
  Embedder& embedder_;
  std::span<const ContextPairRecord> records_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>,
           std::vector<std::optional<ScoreComponents>>>
      cache_;
};

double subset_metric(ContextTask task, ComponentCache& cache,
                     std::span<const ContextPairRecord> records,
                     std::span<const std::size_t> subset, const DisambiguationConfig& cfg,
                     std::size_t* scored = nullptr) {
  const auto& all = cache.get(cfg.k, cfg.w, cfg.q);
  std::vector<std::optional<ScoreComponents>> comps;
  std::vector<double> labels;
  comps.reserve(subset.size());
  labels.reserve(subset.size());
  for (auto i : subset) {
    comps.push_back(all[i]);
    labels.push_back(records[i].label);
  }
  return task_metric(task, comps, labels, cfg.alpha, cfg.theta, scored);
}

TuneResult tune_subset(ContextTask task, ComponentCache& cache,
                       std::span<const ContextPairRecord> records,
                       std::span<const std::size_t> subset, const TuningGrid& grid) {
  if (grid.size() == 0) throw Error(ErrorCode::kConfig, "empty tuning grid");
  if (subset.empty()) throw Error(ErrorCode::kNoScorable, "empty development set");
  std::optional<TuneResult> best;
  for (auto k : grid.ks)
    for (auto w : grid.ws)
      for (auto q : grid.qs)
        for (auto alpha : grid.alphas)
          for (auto theta : grid.thetas) {
            DisambiguationConfig cfg{alpha, q, theta, k, w};
            cfg.validate();
            double metric = 0.0;
            try {
              metric = subset_metric(task, cache, records, subset, cfg);
            } catch (const Error& e) {
              // A constant SCWS ranking has no defined correlation; skip it.
              if (e.code() == ErrorCode::kUndefined) continue;
              throw;
            }
            if (!best || metric > best->metric) best = TuneResult{cfg, metric};
          }
  if (!best) throw Error(ErrorCode::kUndefined, "metric undefined at every grid point");
  return *best;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TaskResult evaluate_task(ContextTask task, Embedder& embedder,
                         std::span<const ContextPairRecord> records,
                         const DisambiguationConfig& cfg) {
  cfg.validate();
  ComponentCache cache(embedder, records);
  const auto idx = all_indices(records.size());
  TaskResult r;
  r.total = records.size();
  r.metric = subset_metric(task, cache, records, idx, cfg, &r.scored);
  return r;
}

TaskResult evaluate_wic(Embedder& embedder, std::span<const ContextPairRecord> records,
                        const DisambiguationConfig& cfg) {
  return evaluate_task(ContextTask::kWic, embedder, records, cfg);
}

TaskResult evaluate_scws(Embedder& embedder, std::span<const ContextPairRecord> records,
                         const DisambiguationConfig& cfg) {
  return evaluate_task(ContextTask::kScws, embedder, records, cfg);
}

TuneResult tune(ContextTask task, Embedder& embedder, std::span<const ContextPairRecord> dev,
                const TuningGrid& grid) {
  ComponentCache cache(embedder, dev);
  const auto idx = all_indices(dev.size());
  return tune_subset(task, cache, dev, idx, grid);
}

CrossValidationResult cross_validate(ContextTask task, Embedder& embedder,
                                     std::span<const ContextPairRecord> records,
                                     std::size_t folds, const TuningGrid& grid) {
  if (folds < 2) throw Error(ErrorCode::kConfig, "cross-validation needs at least 2 folds");
  if (records.size() < folds)
    throw Error(ErrorCode::kConfig, "too few records: " + std::to_string(records.size()) +
                                        " for " + std::to_string(folds) + " folds");
  ComponentCache cache(embedder, records);
  CrossValidationResult out;
  std::vector<double> metrics;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> dev, test;
    for (std::size_t i = 0; i < records.size(); ++i) (i % folds == f ? dev : test).push_back(i);
    const auto tuned = tune_subset(task, cache, records, dev, grid);
    FoldResult fr;
    fr.config = tuned.config;
    fr.dev_metric = tuned.metric;
    fr.test_metric = subset_metric(task, cache, records, test, tuned.config, &fr.test_scored);
    metrics.push_back(fr.test_metric);
    out.folds.push_back(fr);
  }
  mean_std(metrics, out.mean, out.stddev);
  return out;
}

double cosine_similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kLengthMismatch, "vectors differ in length");
  std::size_t dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    dot += x && y;
    na += x;
    nb += y;
  }
  if (na == 0 || nb == 0) throw Error(ErrorCode::kUndefined, "cosine of a zero vector");
  return static_cast<double>(dot) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
}

ClusterQuality cluster_quality(std::span<const BinaryCode> codes,
                               std::span<const std::uint32_t> assignment) {
  if (codes.size() != assignment.size())
    throw Error(ErrorCode::kLengthMismatch, "assignment length != number of codes");
  std::uint32_t clusters = 0;
  for (auto c : assignment) clusters = std::max(clusters, c + 1);
  ClusterQuality q;
  std::vector<double> intra_sum(clusters, 0.0);
  std::vector<std::size_t> intra_pairs(clusters, 0);
  std::vector<double> inter(clusters, 0.0);
  std::vector<bool> has_other(clusters, false);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      const double s = cosine_similarity(codes[i], codes[j]);
      const auto ci = assignment[i];
      const auto cj = assignment[j];
      if (ci == cj) {
        intra_sum[ci] += s;
        ++intra_pairs[ci];
      } else {
        for (auto c : {ci, cj}) {
          inter[c] = has_other[c] ? std::max(inter[c], s) : s;
          has_other[c] = true;
        }
      }
    }
  }
  for (std::uint32_t c = 0; c < clusters; ++c) {
    q.intra.push_back(intra_pairs[c] ? intra_sum[c] / static_cast<double>(intra_pairs[c]) : 1.0);
    q.inter.push_back(inter[c]);
  }
  mean_std(q.intra, q.intra_mean, q.intra_std);
  mean_std(q.inter, q.inter_mean, q.inter_std);
  return q;
}

VocabularyClusters cluster_vocabulary(Embedder& embedder, std::size_t clusters, std::size_t k,
                                      std::size_t max_words) {
  const auto& codes = embedder.static_codes(k);
  const std::size_t n = std::min(max_words, codes.size());
  VocabularyClusters out;
  std::vector<BinaryCode> dense;
  dense.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.words.push_back(static_cast<WordId>(i));
    dense.push_back(codes[i].to_dense());
  }
  out.assignment = agglomerative_cluster(dense, clusters);
  out.quality = cluster_quality(dense, out.assignment);
  return out;
}

std::vector<BinaryCode> binarize_topk(std::span<const std::vector<double>> vectors,
                                      std::size_t k) {
  std::vector<BinaryCode> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    BinaryCode code(v.size(), 0);
    for (auto i : top_k(v, k)) code[i] = 1;
    out.push_back(std::move(code));
  }
  return out;
}

}  // namespace flyhash
