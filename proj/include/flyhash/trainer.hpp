#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flyhash/corpus.hpp"
#include "flyhash/model.hpp"

namespace flyhash {

/// How a unit's merged minibatch delta is applied.
enum class UpdateScaling {
  /// row <- row * (1 - sum of eps * overlap) + sum of eps * v / p
  kRaw,
  /// Same delta, rescaled so its largest entry has magnitude eps.
  kMaxNorm,
};

struct TrainingConfig {
  std::uint32_t units = 400;
  std::uint32_t w = 11;
  std::uint32_t n_voc = 20000;
  std::uint32_t epochs = 15;
  double lr0 = 3e-4;
  std::uint32_t minibatch = 10000;
  std::uint64_t seed = 0;
  std::uint32_t workers = 1;
  std::uint32_t probe_size = 10000;
  UpdateScaling scaling = UpdateScaling::kRaw;

  /// Throws kConfig on out-of-domain values.
  void validate() const;
};

struct EpochReport {
  std::uint32_t epoch = 0;
  double energy = 0.0;
  double samples_per_sec = 0.0;
  double seconds = 0.0;
  double lr = 0.0;

  std::string to_json() const;
};

/// eps0 * (1 - epoch / N_epoch).
double learning_rate(std::uint32_t epoch, const TrainingConfig& cfg);

/// Mean per-sample energy.
double probe_energy(const WeightMatrix& W, const SampleSet& probe, const ProbabilityVector& p);

/// Minibatch gather-then-apply trainer.
///
/// Per minibatch, workers compute the winner and <W, v/p> of each sample
/// against the frozen start-of-batch weights. The merge then walks samples in
/// ascending batch order, so results are bit-identical for any worker count.
class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochReport&, const WeightMatrix&)>;

  Trainer(const TrainingConfig& cfg, const SampleSet& samples, const ProbabilityVector& p);

  const SampleSet& probe() const { return probe_; }

  /// Runs epochs [first_epoch, cfg.epochs) over W in place.
  std::vector<EpochReport> run(WeightMatrix& W, std::uint32_t first_epoch = 0,
                               const EpochCallback& on_epoch = {}) const;

  /// One epoch without energy evaluation; returns wall seconds.
  double run_epoch(WeightMatrix& W, std::uint32_t epoch) const;

  /// Applies one minibatch given as sample indices.
  void apply_minibatch(WeightMatrix& W, std::span<const std::uint32_t> batch,
                       double lr) const;

 private:
  void check_finite(const WeightMatrix& W, std::span<const UnitId> touched) const;

  TrainingConfig cfg_;
  const SampleSet& samples_;
  const ProbabilityVector& p_;
  SampleSet probe_;
};

struct TrainResult {
  WeightMatrix weights;
  std::vector<EpochReport> reports;
};

TrainResult train(const SampleSet& samples, const ProbabilityVector& p,
                  const TrainingConfig& cfg);

/// Vocabulary, probabilities and encoded samples for a sentence-per-line corpus.
struct TrainingData {
  Vocabulary vocab;
  ProbabilityVector p;
  SampleSet samples;
};

TrainingData prepare_training_data(std::span<const std::string> lines, std::uint32_t n_voc,
                                   std::uint32_t w);

struct ScalingPoint {
  std::uint32_t units = 0;
  std::uint32_t n_voc = 0;
  std::size_t samples = 0;
};

struct ScalingRow {
  ScalingPoint point;
  double seconds_per_epoch = 0.0;
};

/// Times one training epoch per grid point (minimum over `repeats` runs).
/// Samples are drawn from the corpus re-encoded with each point's vocabulary
/// size and cycled or truncated to exactly `samples` w-grams.
std::vector<ScalingRow> benchmark_scaling(std::span<const std::string> lines,
                                          const TrainingConfig& base,
                                          std::span<const ScalingPoint> grid,
                                          std::uint32_t repeats = 3);

}  // namespace flyhash
