#include "flyhash/model.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "flyhash/error.hpp"
#include "flyhash/rng.hpp"

namespace flyhash {

namespace {

constexpr std::string_view kModelMagic = "FLYW";

void check_active(const WeightMatrix& W, std::span<const std::uint32_t> active) {
  for (auto i : active)
    if (i >= W.inputs())
      throw Error(ErrorCode::kIdOutOfRange, "input index out of range: " + std::to_string(i));
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - off);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<double> squared_row_norms(const WeightMatrix& W) {
  std::vector<double> out(W.units(), 0.0);
  for (std::size_t i = 0; i < W.inputs(); ++i) {
    const auto col = W.column(i);
    for (std::size_t mu = 0; mu < W.units(); ++mu) {
      const double x = col[mu];
      out[mu] += x * x;
    }
  }
  return out;
}

}  // namespace

WeightMatrix::WeightMatrix(std::size_t units, std::size_t n_voc)
    : units_(units), n_voc_(n_voc), data_(units * 2 * n_voc, 0.0f) {
  if (units == 0 || n_voc == 0)
    throw Error(ErrorCode::kConfig, "weight matrix needs K >= 1 and N_voc >= 1");
}

WeightMatrix WeightMatrix::from_row_major(std::size_t units, std::size_t n_voc,
                                          std::span<const float> values) {
  WeightMatrix W(units, n_voc);
  if (values.size() != W.data_.size())
    throw Error(ErrorCode::kDimensionMismatch, "row-major data has wrong size");
  const std::size_t inputs = W.inputs();
  for (std::size_t mu = 0; mu < units; ++mu)
    for (std::size_t i = 0; i < inputs; ++i) W.data_[i * units + mu] = values[mu * inputs + i];
  return W;
}

std::vector<float> WeightMatrix::row(UnitId unit) const {
  std::vector<float> out(inputs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(unit, i);
  return out;
}

void WeightMatrix::set_row(UnitId unit, std::span<const float> values) {
  if (values.size() != inputs()) throw Error(ErrorCode::kLengthMismatch, "row has wrong length");
  for (std::size_t i = 0; i < values.size(); ++i) at(unit, i) = values[i];
}

std::vector<float> WeightMatrix::to_row_major() const {
  std::vector<float> out(data_.size());
  const std::size_t n = inputs();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t mu = 0; mu < units_; ++mu) out[mu * n + i] = data_[i * units_ + mu];
  return out;
}

std::vector<std::uint8_t> HashCode::to_dense() const {
  std::vector<std::uint8_t> out(K, 0);
  for (auto u : active_units) out[u] = 1;
  return out;
}

WeightMatrix init_weights(std::size_t units, std::size_t n_voc, std::uint64_t seed) {
  WeightMatrix W(units, n_voc);
  const std::size_t inputs = W.inputs();
  std::vector<double> row(inputs);
  for (std::size_t mu = 0; mu < units; ++mu) {
    // One stream per row keeps rows independent of K.
    Rng rng(seed, Stream::kInit, mu);
    double norm2 = 0.0;
    for (auto& x : row) {
      x = rng.gaussian();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < inputs; ++i)
      W.at(static_cast<UnitId>(mu), i) = static_cast<float>(row[i] * inv);
  }
  return W;
}

void activations_into(const WeightMatrix& W, std::span<const std::uint32_t> active,
                      std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t K = W.units();
  double* acc = out.data();
  for (auto i : active) {
    const float* col = W.column(i).data();
    for (std::size_t mu = 0; mu < K; ++mu) acc[mu] += static_cast<double>(col[mu]);
  }
}

std::vector<double> activations(const WeightMatrix& W, std::span<const std::uint32_t> active) {
  check_active(W, active);
  std::vector<double> out(W.units());
  activations_into(W, active, out);
  return out;
}

UnitId winner(std::span<const double> acts) {
  if (acts.empty()) throw Error(ErrorCode::kConfig, "winner of an empty vector");
  std::size_t best = 0;
  for (std::size_t mu = 1; mu < acts.size(); ++mu)
    if (acts[mu] > acts[best]) best = mu;
  return static_cast<UnitId>(best);
}

std::vector<UnitId> top_k(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size())
    throw Error(ErrorCode::kConfig, "hash length k=" + std::to_string(k) + " outside [1, " +
                                        std::to_string(values.size()) + "]");
  std::vector<UnitId> idx(values.size());
  std::iota(idx.begin(), idx.end(), UnitId{0});
  auto before = [&](UnitId a, UnitId b) {
    return values[a] != values[b] ? values[a] > values[b] : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(),
                   before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double row_norm(const WeightMatrix& W, UnitId unit) {
  double s = 0.0;
  for (std::size_t i = 0; i < W.inputs(); ++i) {
    const double x = W.at(unit, i);
    s += x * x;
  }
  return std::sqrt(s);
}

double weighted_overlap(const WeightMatrix& W, UnitId unit,
                        std::span<const std::uint32_t> active, const ProbabilityVector& p) {
  double s = 0.0;
  for (auto i : active) s += static_cast<double>(W.at(unit, i)) / p.p[i];
  return s;
}

namespace {

template <typename Samples, typename Get>
double energy_impl(const WeightMatrix& W, const Samples& samples, std::size_t n, Get get,
                   const ProbabilityVector& p) {
  if (p.p.size() != W.inputs())
    throw Error(ErrorCode::kDimensionMismatch, "probability vector length != 2 * N_voc");
  if (n == 0) return 0.0;
  const auto norms2 = squared_row_norms(W);
  std::vector<double> acts(W.units());
  double e = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const std::span<const std::uint32_t> s = get(samples, a);
    check_active(W, s);
    activations_into(W, s, acts);
    const UnitId mu = winner(acts);
    if (!(norms2[mu] > 0.0))
      throw Error(ErrorCode::kDegenerateUnit, "degenerate unit " + std::to_string(mu));
    e -= weighted_overlap(W, mu, s, p) / std::sqrt(norms2[mu]);
  }
  return e;
}

}  // namespace

double energy(const WeightMatrix& W, const SampleSet& samples, const ProbabilityVector& p) {
  return energy_impl(W, samples, samples.size(),
                     [](const SampleSet& s, std::size_t a) { return s[a]; }, p);
}

double energy(const WeightMatrix& W, std::span<const EncodedSample> samples,
              const ProbabilityVector& p) {
  return energy_impl(
      W, samples, samples.size(),
      [](std::span<const EncodedSample> s, std::size_t a) {
        return std::span<const std::uint32_t>(s[a].active_indices);
      },
      p);
}

UnitDelta update_delta(const WeightMatrix& W, std::span<const std::uint32_t> active,
                       const ProbabilityVector& p, double learning_rate) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be positive");
  if (p.p.size() != W.inputs())
    throw Error(ErrorCode::kDimensionMismatch, "probability vector length != 2 * N_voc");
  const auto acts = activations(W, active);
  UnitDelta d;
  d.unit = winner(acts);
  d.overlap = weighted_overlap(W, d.unit, active, p);
  d.row.resize(W.inputs());
  for (std::size_t i = 0; i < d.row.size(); ++i)
    d.row[i] = -learning_rate * d.overlap * static_cast<double>(W.at(d.unit, i));
  for (auto i : active) d.row[i] += learning_rate / p.p[i];
  return d;
}

HashCode hash_activations(std::span<const double> acts, std::size_t k) {
  HashCode h;
  h.K = acts.size();
  h.active_units = top_k(acts, k);
  return h;
}

HashCode hash(const WeightMatrix& W, std::span<const std::uint32_t> active, std::size_t k) {
  if (k == 0 || k > W.units())
    throw Error(ErrorCode::kConfig, "hash length k=" + std::to_string(k) + " exceeds K=" +
                                        std::to_string(W.units()));
  return hash_activations(activations(W, active), k);
}

HashCode static_embedding(const WeightMatrix& W, WordId word, std::size_t k) {
  if (word >= W.vocab_size())
    throw Error(ErrorCode::kIdOutOfRange, "id out of range: " + std::to_string(word));
  const std::uint32_t input = static_cast<std::uint32_t>(W.vocab_size() + word);
  return hash(W, std::span<const std::uint32_t>(&input, 1), k);
}

HashCode context_embedding(const WeightMatrix& W, const WGram& g, std::size_t k) {
  const auto s = encode_wgram(g, W.vocab_size());
  return hash(W, s.active_indices, k);
}

std::vector<double> kc_word_distribution(const WeightMatrix& W, UnitId unit, Block block) {
  if (unit >= W.units())
    throw Error(ErrorCode::kIdOutOfRange, "unit out of range: " + std::to_string(unit));
  const std::size_t n = W.vocab_size();
  const std::size_t offset = block == Block::kTarget ? n : 0;
  std::vector<double> out(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = W.at(unit, offset + j);
    mx = std::max(mx, out[j]);
  }
  double z = 0.0;
  for (auto& x : out) {
    x = std::exp(x - mx);
    z += x;
  }
  for (auto& x : out) x /= z;
  return out;
}

std::string save_model(const Model& model) {
  const auto& W = model.weights;
  if (W.units() == 0) throw Error(ErrorCode::kConfig, "cannot save an empty model");
  if (model.vocab.size() != W.vocab_size())
    throw Error(ErrorCode::kDimensionMismatch, "vocabulary size != weight matrix N_voc");
  detail::ByteWriter out;
  out.reserve(40 + 4 * W.raw().size() + 16 * model.vocab.size());
  out.bytes(kModelMagic);
  out.u32(kModelVersion);
  out.u32(static_cast<std::uint32_t>(W.units()));
  out.u32(static_cast<std::uint32_t>(W.vocab_size()));
  out.u32(model.header.w);
  out.u64(model.header.seed);
  out.u32(model.header.epochs_trained);
  out.u32(model.header.prng_id);
  for (float x : W.to_row_major()) out.f32(x);
  out.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    const auto& tok = model.vocab.tokens()[i];
    out.u32(static_cast<std::uint32_t>(tok.size()));
    out.bytes(tok);
    out.u64(model.vocab.counts()[i]);
  }
  const auto crc = crc32_of(out.str());
  out.u32(crc);
  return out.take();
}

Model load_model(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || in.bytes(4) != kModelMagic) throw Error(ErrorCode::kBadMagic, "bad magic");
  const auto version = in.u32();
  if (version != kModelVersion)
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported model version " + std::to_string(version));
  const std::size_t K = in.u32();
  const std::size_t n_voc = in.u32();
  Model m;
  m.header.w = in.u32();
  m.header.seed = in.u64();
  m.header.epochs_trained = in.u32();
  m.header.prng_id = in.u32();
  if (K == 0 || n_voc == 0) throw Error(ErrorCode::kDimensionMismatch, "zero model dimension");
  const std::size_t count = K * 2 * n_voc;
  if (in.remaining() / 4 < count) throw Error(ErrorCode::kTruncated, "truncated");
  std::vector<float> values(count);
  for (auto& v : values) v = in.f32();
  const std::size_t tokens = in.u32();
  if (tokens != n_voc)
    throw Error(ErrorCode::kDimensionMismatch, "vocabulary block has " + std::to_string(tokens) +
                                                   " tokens, header says " +
                                                   std::to_string(n_voc));
  std::vector<std::string> toks(tokens);
  std::vector<std::uint64_t> counts(tokens);
  for (std::size_t i = 0; i < tokens; ++i) {
    const auto len = in.u32();
    toks[i] = std::string(in.bytes(len));
    counts[i] = in.u64();
  }
  const auto payload = bytes.substr(0, in.position());
  const auto stored_crc = in.u32();
  if (in.remaining() != 0)
    throw Error(ErrorCode::kDimensionMismatch, "trailing bytes after checksum");
  if (crc32_of(payload) != stored_crc) throw Error(ErrorCode::kChecksumMismatch, "checksum mismatch");
  m.weights = WeightMatrix::from_row_major(K, n_voc, values);
  m.vocab = Vocabulary(std::move(toks), std::move(counts));
  return m;
}

void save_model_file(const std::filesystem::path& path, const Model& model) {
  detail::write_file(path.string(), save_model(model));
}

Model load_model_file(const std::filesystem::path& path) {
  return load_model(detail::read_file(path.string()));
}

}  // namespace flyhash
