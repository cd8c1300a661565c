#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace flyhash {

/// Identifier stored in model headers for the generator below.
inline constexpr std::uint32_t kPrngXoshiro256ss = 1;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Independent stream tags; mixed into the key so that different consumers
/// of one seed never share a sequence.
enum class Stream : std::uint64_t {
  kShuffle = 0x5348554646ull,
  kInit = 0x494E4954ull,
  kBench = 0x42454E43ull,
  kTest = 0x54455354ull,
};

/// xoshiro256** keyed by (seed, stream, index). Deterministic across
/// platforms: all derived draws (bounded ints, uniforms, Gaussians) are
/// implemented here instead of through <random> distributions.
class Rng {
  __extension__ using Wide = unsigned __int128;

 public:
  explicit Rng(std::uint64_t seed, Stream stream = Stream::kTest,
               std::uint64_t index = 0) {
    std::uint64_t sm = seed;
    std::uint64_t key = splitmix64(sm) ^ static_cast<std::uint64_t>(stream);
    sm = key;
    key = splitmix64(sm) ^ (index * 0xD1B54A32D192ED03ull);
    sm = key;
    for (auto& s : s_) s = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform integer in [0, bound), Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound) {
    Wide m = static_cast<Wide>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = -bound % bound;
      while (low < threshold) {
        m = static_cast<Wide>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace flyhash
