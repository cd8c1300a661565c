#include "flyhash/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "binary_io.hpp"
#include "flyhash/error.hpp"
#include "flyhash/rng.hpp"

namespace flyhash {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes of multi-byte UTF-8 sequences count as word characters.
bool is_word_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

constexpr std::string_view kSampleMagic = "FLYG";

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
  if (tokens_.size() != counts_.size())
    throw Error(ErrorCode::kLengthMismatch, "vocabulary tokens and counts differ in length");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (counts_[i] == 0)
      throw Error(ErrorCode::kConfig, "vocabulary count must be positive: " + tokens_[i]);
    if (i > 0) {
      const bool ordered = counts_[i - 1] > counts_[i] ||
                           (counts_[i - 1] == counts_[i] && tokens_[i - 1] < tokens_[i]);
      if (!ordered)
        throw Error(ErrorCode::kConfig, "vocabulary not in (count desc, token asc) order at " +
                                            tokens_[i]);
    }
    if (!index_.emplace(tokens_[i], static_cast<WordId>(i)).second)
      throw Error(ErrorCode::kConfig, "duplicate vocabulary token: " + tokens_[i]);
  }
}

std::optional<WordId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t end = i;
    while (end < line.size() && !is_space(static_cast<unsigned char>(line[end]))) ++end;
    std::size_t b = i;
    std::size_t e = end;
    while (b < e && !is_word_char(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && !is_word_char(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b < e) {
      std::string tok(line.substr(b, e - b));
      std::transform(tok.begin(), tok.end(), tok.begin(), ascii_lower);
      out.push_back(std::move(tok));
    }
    i = end;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  bool pending_space = false;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
    pending_space = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      pending_space = !current.empty();
      continue;
    }
    if (pending_space) current.push_back(' ');
    pending_space = false;
    current.push_back(static_cast<char>(c));
    if (c == '.' || c == '?' || c == '!') {
      const bool boundary =
          i + 1 == text.size() || is_space(static_cast<unsigned char>(text[i + 1]));
      if (boundary) flush();
    }
  }
  flush();
  return out;
}

void count_tokens(std::span<const std::string> tokens, TokenCounts& counts) {
  for (const auto& t : tokens) ++counts[t];
}

Vocabulary vocabulary_from_counts(const TokenCounts& counts, std::size_t n_voc) {
  if (n_voc == 0) throw Error(ErrorCode::kConfig, "vocabulary size must be at least 1");
  if (counts.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty corpus");
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  auto before = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  const std::size_t keep = std::min(n_voc, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), before);
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> cs;
  tokens.reserve(keep);
  cs.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    tokens.push_back(std::move(ranked[i].first));
    cs.push_back(ranked[i].second);
  }
  return Vocabulary(std::move(tokens), std::move(cs));
}

Vocabulary build_vocabulary(std::span<const std::string> tokens, std::size_t n_voc) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty corpus");
  TokenCounts counts;
  count_tokens(tokens, counts);
  return vocabulary_from_counts(counts, n_voc);
}

std::vector<WordId> to_ids(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto id = vocab.find(t)) ids.push_back(*id);
  return ids;
}

void check_window(std::uint32_t w) {
  if (w < 3 || w % 2 == 0)
    throw Error(ErrorCode::kConfig, "window size must be odd and >= 3, got " + std::to_string(w));
}

std::vector<WGram> ids_to_wgrams(std::span<const WordId> ids, std::uint32_t w) {
  check_window(w);
  std::vector<WGram> out;
  if (ids.size() < w) return out;
  const std::size_t half = w / 2;
  out.reserve(ids.size() - w + 1);
  for (std::size_t start = 0; start + w <= ids.size(); ++start) {
    WGram g;
    g.w = w;
    g.target_id = ids[start + half];
    g.context_ids.reserve(w - 1);
    for (std::size_t j = 0; j < w; ++j)
      if (j != half) g.context_ids.push_back(ids[start + j]);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<WGram> sentence_to_wgrams(std::span<const std::string> sentence_tokens,
                                      std::uint32_t w, const Vocabulary& vocab) {
  check_window(w);
  const auto ids = to_ids(sentence_tokens, vocab);
  return ids_to_wgrams(ids, w);
}

EncodedSample encode_wgram(const WGram& g, std::size_t n_voc) {
  EncodedSample s;
  s.active_indices.reserve(g.context_ids.size() + 1);
  for (WordId id : g.context_ids) {
    if (id >= n_voc)
      throw Error(ErrorCode::kIdOutOfRange, "id out of range: " + std::to_string(id));
    s.active_indices.push_back(id);
  }
  if (g.target_id >= n_voc)
    throw Error(ErrorCode::kIdOutOfRange, "id out of range: " + std::to_string(g.target_id));
  std::sort(s.active_indices.begin(), s.active_indices.end());
  s.active_indices.erase(std::unique(s.active_indices.begin(), s.active_indices.end()),
                         s.active_indices.end());
  s.active_indices.push_back(static_cast<std::uint32_t>(n_voc + g.target_id));
  return s;
}

ProbabilityVector occurrence_probabilities(const Vocabulary& vocab) {
  if (vocab.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty vocabulary");
  const std::size_t n = vocab.size();
  // Summed as integers so the normalization is exact up to one rounding.
  std::uint64_t total = 0;
  for (auto c : vocab.counts()) total += c;
  ProbabilityVector out;
  out.p.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.p[i] = static_cast<double>(vocab.count(static_cast<WordId>(i))) /
               static_cast<double>(total);
    out.p[i + n] = out.p[i];
  }
  return out;
}

std::vector<std::uint32_t> shuffle_epoch(std::size_t sample_count, std::uint64_t epoch,
                                         std::uint64_t seed) {
  if (sample_count == 0) throw Error(ErrorCode::kConfig, "sample_count must be positive");
  if (sample_count > UINT32_MAX)
    throw Error(ErrorCode::kConfig, "too many samples for a 32-bit permutation");
  std::vector<std::uint32_t> perm(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) perm[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed, Stream::kShuffle, epoch);
  for (std::size_t i = sample_count - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

void SampleSet::push_back(std::span<const std::uint32_t> active) {
  indices_.insert(indices_.end(), active.begin(), active.end());
  offsets_.push_back(indices_.size());
}

void SampleSet::reserve(std::size_t samples, std::size_t active) {
  offsets_.reserve(samples + 1);
  indices_.reserve(active);
}

SampleSet encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab,
                        std::uint32_t w) {
  check_window(w);
  SampleSet out;
  for (const auto& line : lines) {
    const auto tokens = tokenize(line);
    const auto ids = to_ids(tokens, vocab);
    if (ids.size() < w) continue;
    for (const auto& g : ids_to_wgrams(ids, w)) out.push_back(encode_wgram(g, vocab.size()));
  }
  return out;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out << vocab.tokens()[i] << '\t' << vocab.counts()[i] << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorCode::kConfig, "malformed vocabulary line " + std::to_string(lineno));
    try {
      std::size_t used = 0;
      const std::string count_text = line.substr(tab + 1);
      const auto count = std::stoull(count_text, &used);
      if (used != count_text.size()) throw std::invalid_argument("trailing");
      tokens.push_back(line.substr(0, tab));
      counts.push_back(count);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kConfig, "bad count on vocabulary line " + std::to_string(lineno));
    }
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ostringstream out;
  write_vocabulary(out, vocab);
  detail::write_file(path.string(), out.str());
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path.string()));
  return read_vocabulary(in);
}

std::string serialize_samples(const SampleCache& cache) {
  detail::ByteWriter out;
  out.reserve(24 + cache.samples.size() + 4 * cache.samples.total_active());
  out.bytes(kSampleMagic);
  out.u32(kSampleCacheVersion);
  out.u32(cache.n_voc);
  out.u32(cache.w);
  out.u64(cache.samples.size());
  for (std::size_t i = 0; i < cache.samples.size(); ++i) {
    const auto s = cache.samples[i];
    if (s.size() > 255) throw Error(ErrorCode::kConfig, "sample has more than 255 active inputs");
    out.u8(static_cast<std::uint8_t>(s.size()));
    for (auto idx : s) out.u32(idx);
  }
  return out.take();
}

SampleCache deserialize_samples(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || in.bytes(4) != kSampleMagic)
    throw Error(ErrorCode::kBadMagic, "bad magic");
  const auto version = in.u32();
  if (version != kSampleCacheVersion)
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported sample cache version " + std::to_string(version));
  SampleCache cache;
  cache.n_voc = in.u32();
  cache.w = in.u32();
  const auto count = in.u64();
  std::vector<std::uint32_t> active;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto nnz = in.u8();
    active.resize(nnz);
    for (auto& a : active) {
      a = in.u32();
      if (a >= 2ull * cache.n_voc)
        throw Error(ErrorCode::kDimensionMismatch, "sample index exceeds 2 * N_voc");
    }
    cache.samples.push_back(active);
  }
  return cache;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

}  // namespace detail

}  // namespace flyhash
