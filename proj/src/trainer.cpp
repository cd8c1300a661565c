#include "flyhash/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "flyhash/error.hpp"

namespace flyhash {

namespace {

constexpr double kDivergenceLimit = 1e6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Runs fn(begin, end) over `workers` contiguous chunks of [0, n).
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = std::min(n, w * step);
    const std::size_t e = std::min(n, b + step);
    if (b < e) threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, step));
}

[[noreturn]] void diverged(UnitId unit, double value) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "weights diverged at unit %u (|w| = %g); lower the learning rate or minibatch",
                static_cast<unsigned>(unit), value);
  throw Error(ErrorCode::kNonFinite, buf);
}

inline void guard(UnitId unit, float value) {
  if (!(std::fabs(value) <= kDivergenceLimit)) diverged(unit, value);
}

}  // namespace

void TrainingConfig::validate() const {
  if (epochs == 0) throw Error(ErrorCode::kNothingToTrain, "nothing to train");
  if (units == 0) throw Error(ErrorCode::kConfig, "K must be at least 1");
  check_window(w);
  if (n_voc == 0) throw Error(ErrorCode::kConfig, "vocabulary size must be at least 1");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0))
    throw Error(ErrorCode::kConfig, "initial learning rate must be finite and >= 0");
  if (minibatch == 0) throw Error(ErrorCode::kConfig, "minibatch size must be at least 1");
  if (workers == 0) throw Error(ErrorCode::kConfig, "worker count must be at least 1");
}

std::string EpochReport::to_json() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"epoch\":%u,\"energy\":%.17g,\"samples_per_sec\":%.17g,\"seconds\":%.17g,"
                "\"lr\":%.17g}",
                static_cast<unsigned>(epoch), energy, samples_per_sec, seconds, lr);
  return buf;
}

double learning_rate(std::uint32_t epoch, const TrainingConfig& cfg) {
  if (cfg.epochs == 0 || epoch >= cfg.epochs)
    throw Error(ErrorCode::kConfig, "epoch " + std::to_string(epoch) + " outside schedule of " +
                                        std::to_string(cfg.epochs) + " epochs");
  return cfg.lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
}

double probe_energy(const WeightMatrix& W, const SampleSet& probe, const ProbabilityVector& p) {
  if (probe.empty()) return 0.0;
  return energy(W, probe, p) / static_cast<double>(probe.size());
}

Trainer::Trainer(const TrainingConfig& cfg, const SampleSet& samples, const ProbabilityVector& p)
    : cfg_(cfg), samples_(samples), p_(p) {
  cfg_.validate();
  if (samples_.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty corpus: no w-grams");
  if (p_.p.size() != 2ull * cfg_.n_voc)
    throw Error(ErrorCode::kDimensionMismatch, "probability vector length != 2 * N_voc");
  const auto first = shuffle_epoch(samples_.size(), 0, cfg_.seed);
  const std::size_t m = std::min<std::size_t>(cfg_.probe_size, first.size());
  for (std::size_t i = 0; i < m; ++i) probe_.push_back(samples_[first[i]]);
}

void Trainer::apply_minibatch(WeightMatrix& W, std::span<const std::uint32_t> batch,
                              double lr) const {
  if (batch.empty() || lr == 0.0) return;
  const std::size_t K = W.units();
  const std::size_t inputs = W.inputs();

  // Gather: winner and <W, v/p> of every sample against the frozen weights.
  std::vector<UnitId> winners(batch.size());
  std::vector<double> overlaps(batch.size());
  const WeightMatrix& frozen = W;
  parallel_chunks(batch.size(), cfg_.workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> acts(K);
    for (std::size_t j = b; j < e; ++j) {
      const auto s = samples_[batch[j]];
      activations_into(frozen, s, acts);
      const UnitId mu = winner(acts);
      winners[j] = mu;
      overlaps[j] = weighted_overlap(frozen, mu, s, p_);
    }
  });

  // Merge in ascending batch order. The dense part collapses to one scalar per
  // unit; the sparse part to a hit count per (unit, input).
  std::vector<double> coef(K, 0.0);
  std::vector<std::uint64_t> hits;
  hits.reserve(batch.size() * static_cast<std::size_t>(cfg_.w));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const UnitId mu = winners[j];
    coef[mu] += lr * overlaps[j];
    for (auto i : samples_[batch[j]]) hits.push_back(static_cast<std::uint64_t>(mu) * inputs + i);
  }
  std::sort(hits.begin(), hits.end());

  std::vector<UnitId> touched;
  for (std::size_t j = 0; j < batch.size(); ++j) touched.push_back(winners[j]);
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

  if (cfg_.scaling == UpdateScaling::kRaw) {
    // row <- row * (1 - coef)
    std::vector<double> scale(K, 1.0);
    for (auto mu : touched) scale[mu] = 1.0 - coef[mu];
    if (touched.size() * 8 > K) {
      for (std::size_t i = 0; i < inputs; ++i) {
        float* col = W.column(i).data();
        for (std::size_t mu = 0; mu < K; ++mu)
          col[mu] = static_cast<float>(static_cast<double>(col[mu]) * scale[mu]);
      }
    } else {
      for (auto mu : touched)
        for (std::size_t i = 0; i < inputs; ++i)
          W.at(mu, i) = static_cast<float>(static_cast<double>(W.at(mu, i)) * scale[mu]);
    }
    // row += sum of eps * v / p
    for (std::size_t a = 0; a < hits.size();) {
      std::size_t b = a;
      while (b < hits.size() && hits[b] == hits[a]) ++b;
      const auto mu = static_cast<UnitId>(hits[a] / inputs);
      const auto i = static_cast<std::size_t>(hits[a] % inputs);
      float& wt = W.at(mu, i);
      wt = static_cast<float>(static_cast<double>(wt) +
                              static_cast<double>(b - a) * (lr / p_.p[i]));
      a = b;
    }
    check_finite(W, touched);
    return;
  }

  // Max-norm: the same merged delta, rescaled to a largest entry of lr.
  std::vector<double> delta(inputs);
  std::size_t a = 0;
  for (auto mu : touched) {
    for (std::size_t i = 0; i < inputs; ++i)
      delta[i] = -coef[mu] * static_cast<double>(W.at(mu, i));
    for (; a < hits.size() && hits[a] / inputs == mu;) {
      std::size_t b = a;
      while (b < hits.size() && hits[b] == hits[a]) ++b;
      const auto i = static_cast<std::size_t>(hits[a] % inputs);
      delta[i] += static_cast<double>(b - a) * (lr / p_.p[i]);
      a = b;
    }
    double mx = 0.0;
    for (double d : delta) mx = std::max(mx, std::fabs(d));
    if (mx == 0.0) continue;
    const double factor = lr / mx;
    for (std::size_t i = 0; i < inputs; ++i) {
      float& wt = W.at(mu, i);
      wt = static_cast<float>(static_cast<double>(wt) + factor * delta[i]);
      guard(mu, wt);
    }
  }
}

double Trainer::run_epoch(WeightMatrix& W, std::uint32_t epoch) const {
  if (W.units() != cfg_.units || W.vocab_size() != cfg_.n_voc)
    throw Error(ErrorCode::kDimensionMismatch, "weights do not match the training config");
  const double lr = learning_rate(epoch, cfg_);
  const auto start = Clock::now();
  const auto perm = shuffle_epoch(samples_.size(), epoch, cfg_.seed);
  const std::span<const std::uint32_t> all(perm);
  for (std::size_t b = 0; b < perm.size(); b += cfg_.minibatch) {
    const std::size_t len = std::min<std::size_t>(cfg_.minibatch, perm.size() - b);
    apply_minibatch(W, all.subspan(b, len), lr);
  }
  return seconds_since(start);
}

std::vector<EpochReport> Trainer::run(WeightMatrix& W, std::uint32_t first_epoch,
                                      const EpochCallback& on_epoch) const {
  std::vector<EpochReport> reports;
  for (std::uint32_t epoch = first_epoch; epoch < cfg_.epochs; ++epoch) {
    EpochReport r;
    r.epoch = epoch;
    r.lr = learning_rate(epoch, cfg_);
    r.seconds = run_epoch(W, epoch);
    r.samples_per_sec = static_cast<double>(samples_.size()) / std::max(r.seconds, 1e-9);
    r.energy = probe_energy(W, probe_, p_);
    if (!std::isfinite(r.energy)) throw Error(ErrorCode::kNonFinite, "probe energy is not finite");
    if (on_epoch) on_epoch(r, W);
    reports.push_back(r);
  }
  return reports;
}

void Trainer::check_finite(const WeightMatrix& W, std::span<const UnitId> touched) const {
  for (auto mu : touched)
    for (std::size_t i = 0; i < W.inputs(); ++i) guard(mu, W.at(mu, i));
}

TrainResult train(const SampleSet& samples, const ProbabilityVector& p,
                  const TrainingConfig& cfg) {
  Trainer trainer(cfg, samples, p);
  TrainResult out;
  out.weights = init_weights(cfg.units, cfg.n_voc, cfg.seed);
  out.reports = trainer.run(out.weights);
  return out;
}

TrainingData prepare_training_data(std::span<const std::string> lines, std::uint32_t n_voc,
                                   std::uint32_t w) {
  check_window(w);
  TokenCounts counts;
  for (const auto& line : lines) count_tokens(tokenize(line), counts);
  TrainingData data;
  data.vocab = vocabulary_from_counts(counts, n_voc);
  data.p = occurrence_probabilities(data.vocab);
  data.samples = encode_corpus(lines, data.vocab, w);
  if (data.samples.empty())
    throw Error(ErrorCode::kEmptyCorpus, "empty corpus: no sentence has w in-vocabulary tokens");
  return data;
}

std::vector<ScalingRow> benchmark_scaling(std::span<const std::string> lines,
                                          const TrainingConfig& base,
                                          std::span<const ScalingPoint> grid,
                                          std::uint32_t repeats) {
  struct Prepared {
    TrainingConfig cfg;
    SampleSet subset;
    const ProbabilityVector* p = nullptr;
  };
  std::map<std::uint32_t, TrainingData> by_vocab;
  std::vector<Prepared> prepared;
  for (const auto& point : grid) {
    if (point.samples == 0) throw Error(ErrorCode::kConfig, "benchmark sample count must be > 0");
    auto it = by_vocab.find(point.n_voc);
    if (it == by_vocab.end())
      it = by_vocab.emplace(point.n_voc, prepare_training_data(lines, point.n_voc, base.w)).first;
    const auto& data = it->second;
    Prepared pr;
    for (std::size_t i = 0; i < point.samples; ++i)
      pr.subset.push_back(data.samples[i % data.samples.size()]);
    pr.cfg = base;
    pr.cfg.units = point.units;
    pr.cfg.n_voc = static_cast<std::uint32_t>(data.vocab.size());
    pr.cfg.epochs = 1;
    pr.cfg.probe_size = 0;
    pr.p = &data.p;
    prepared.push_back(std::move(pr));
  }

  // Repeats are interleaved across points so slow drift in machine speed
  // affects every point alike.
  std::vector<ScalingRow> rows;
  for (const auto& point : grid) rows.push_back({point, 0.0});
  for (std::uint32_t r = 0; r < std::max(1u, repeats); ++r) {
    for (std::size_t g = 0; g < prepared.size(); ++g) {
      const auto& pr = prepared[g];
      Trainer trainer(pr.cfg, pr.subset, *pr.p);
      WeightMatrix W = init_weights(pr.cfg.units, pr.cfg.n_voc, pr.cfg.seed);
      const double t = trainer.run_epoch(W, 0);
      rows[g].seconds_per_epoch = r == 0 ? t : std::min(rows[g].seconds_per_epoch, t);
    }
  }
  return rows;
}

}  // namespace flyhash
