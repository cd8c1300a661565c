#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flyhash/corpus.hpp"

namespace flyhash {

using UnitId = std::uint32_t;

/// K x 2*n_voc synapse matrix from input (PN) units to Kenyon cells.
///
/// Stored input-major: the K weights fanning out of one input are contiguous,
/// so a sparse sample's activations are a sum of |active| contiguous columns.
/// Serialization always uses the row-major (unit-major) order.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::size_t units, std::size_t n_voc);

  static WeightMatrix from_row_major(std::size_t units, std::size_t n_voc,
                                     std::span<const float> values);

  std::size_t units() const { return units_; }
  std::size_t vocab_size() const { return n_voc_; }
  std::size_t inputs() const { return 2 * n_voc_; }

  float at(UnitId unit, std::size_t input) const { return data_[input * units_ + unit]; }
  float& at(UnitId unit, std::size_t input) { return data_[input * units_ + unit]; }

  std::span<const float> column(std::size_t input) const {
    return {data_.data() + input * units_, units_};
  }
  std::span<float> column(std::size_t input) {
    return {data_.data() + input * units_, units_};
  }

  std::vector<float> row(UnitId unit) const;
  void set_row(UnitId unit, std::span<const float> values);
  std::vector<float> to_row_major() const;

  std::span<const float> raw() const { return data_; }
  std::span<float> raw() { return data_; }

  bool operator==(const WeightMatrix&) const = default;

 private:
  std::size_t units_ = 0;
  std::size_t n_voc_ = 0;
  std::vector<float> data_;
};

/// Sorted indices of the k active units out of K.
struct HashCode {
  std::vector<UnitId> active_units;
  std::size_t K = 0;

  std::size_t k() const { return active_units.size(); }
  std::vector<std::uint8_t> to_dense() const;

  bool operator==(const HashCode&) const = default;
};

/// Gaussian entries, each row rescaled to unit Euclidean norm.
WeightMatrix init_weights(std::size_t units, std::size_t n_voc, std::uint64_t seed);

/// Sparse dot products of every unit with a binary sample.
std::vector<double> activations(const WeightMatrix& W, std::span<const std::uint32_t> active);
void activations_into(const WeightMatrix& W, std::span<const std::uint32_t> active,
                      std::span<double> out);

/// Argmax with ties going to the smallest index.
UnitId winner(std::span<const double> acts);

/// Indices of the k largest values, ties at rank k to the smallest index,
/// returned sorted ascending.
std::vector<UnitId> top_k(std::span<const double> values, std::size_t k);

double row_norm(const WeightMatrix& W, UnitId unit);

/// <W_mu, v / p> over the active inputs.
double weighted_overlap(const WeightMatrix& W, UnitId unit,
                        std::span<const std::uint32_t> active, const ProbabilityVector& p);

double energy(const WeightMatrix& W, const SampleSet& samples, const ProbabilityVector& p);
double energy(const WeightMatrix& W, std::span<const EncodedSample> samples,
              const ProbabilityVector& p);

/// Single-sample learning step. Only `row` of the delta is non-zero.
struct UnitDelta {
  UnitId unit = 0;
  /// <W_unit, v/p> at the weights the delta was computed against.
  double overlap = 0.0;
  /// Dense delta for the winning row, length 2 * n_voc.
  std::vector<double> row;
};

UnitDelta update_delta(const WeightMatrix& W, std::span<const std::uint32_t> active,
                       const ProbabilityVector& p, double learning_rate);

HashCode hash(const WeightMatrix& W, std::span<const std::uint32_t> active, std::size_t k);
HashCode hash_activations(std::span<const double> acts, std::size_t k);

HashCode static_embedding(const WeightMatrix& W, WordId word, std::size_t k);
HashCode context_embedding(const WeightMatrix& W, const WGram& g, std::size_t k);

enum class Block { kContext, kTarget };

/// Softmax over one block of a unit's weights: a distribution over words.
std::vector<double> kc_word_distribution(const WeightMatrix& W, UnitId unit,
                                         Block block = Block::kTarget);

// Model file.
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelHeader {
  std::uint32_t w = 0;
  std::uint64_t seed = 0;
  std::uint32_t epochs_trained = 0;
  std::uint32_t prng_id = 0;

  bool operator==(const ModelHeader&) const = default;
};

struct Model {
  WeightMatrix weights;
  Vocabulary vocab;
  ModelHeader header;

  bool operator==(const Model&) const = default;
};

std::string save_model(const Model& model);
Model load_model(std::string_view bytes);
void save_model_file(const std::filesystem::path& path, const Model& model);
Model load_model_file(const std::filesystem::path& path);

}  // namespace flyhash
