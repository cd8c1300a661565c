#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "flyhash/error.hpp"
#include "flyhash/eval.hpp"

namespace flyhash {

namespace {

__extension__ using Wide = unsigned __int128;

/// cos^2 = dot^2 / (|a| |b|) kept as an exact fraction, so equal similarities
/// compare equal regardless of how they were reached.
struct Cosine {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  friend bool operator<(const Cosine& a, const Cosine& b) {
    return static_cast<Wide>(a.num) * b.den <
           static_cast<Wide>(b.num) * a.den;
  }
  friend bool operator==(const Cosine& a, const Cosine& b) { return !(a < b) && !(b < a); }
};

class PackedCodes {
 public:
  explicit PackedCodes(std::span<const BinaryCode> codes) {
    n_ = codes.size();
    dim_ = codes.empty() ? 0 : codes[0].size();
    words_ = (dim_ + 63) / 64;
    bits_.assign(n_ * words_, 0);
    norms_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      if (codes[i].size() != dim_)
        throw Error(ErrorCode::kLengthMismatch, "codes differ in length");
      for (std::size_t d = 0; d < dim_; ++d)
        if (codes[i][d]) bits_[i * words_ + d / 64] |= std::uint64_t{1} << (d % 64);
      for (std::size_t wd = 0; wd < words_; ++wd)
        norms_[i] += static_cast<std::uint64_t>(std::popcount(bits_[i * words_ + wd]));
      if (norms_[i] == 0)
        throw Error(ErrorCode::kUndefined, "zero vector at index " + std::to_string(i));
    }
  }

  Cosine cosine(std::size_t a, std::size_t b) const {
    std::uint64_t dot = 0;
    for (std::size_t wd = 0; wd < words_; ++wd)
      dot += static_cast<std::uint64_t>(std::popcount(bits_[a * words_ + wd] & bits_[b * words_ + wd]));
    return {dot * dot, norms_[a] * norms_[b]};
  }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint64_t> norms_;
};

}  // namespace

std::vector<std::uint32_t> agglomerative_cluster(std::span<const BinaryCode> codes,
                                                 std::size_t clusters) {
  const std::size_t n = codes.size();
  if (clusters == 0 || clusters > n)
    throw Error(ErrorCode::kConfig, "cluster count must lie in [1, " + std::to_string(n) + "]");
  const PackedCodes packed(codes);

  // Linkage similarity (the minimum pairwise cosine) of clusters a < b,
  // stored in the strict upper triangle. A cluster is named after its
  // smallest member; merging (a, b) keeps a.
  auto tri = [n](std::size_t a, std::size_t b) { return a * n - a * (a + 1) / 2 + (b - a - 1); };
  std::vector<Cosine> link(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) link[tri(a, b)] = packed.cosine(a, b);
  auto L = [&](std::size_t a, std::size_t b) -> Cosine& {
    return a < b ? link[tri(a, b)] : link[tri(b, a)];
  };

  std::vector<std::uint8_t> active(n, 1);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;

  // Best partner b > a of every active a: most similar, then smallest b.
  constexpr std::size_t kNone = SIZE_MAX;
  std::vector<std::size_t> nn(n, kNone);
  auto refresh = [&](std::size_t a) {
    nn[a] = kNone;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!active[b]) continue;
      if (nn[a] == kNone || L(nn[a], a) < L(a, b)) nn[a] = b;
    }
  };
  for (std::size_t a = 0; a < n; ++a) refresh(a);

  for (std::size_t remaining = n; remaining > clusters; --remaining) {
    std::size_t a = kNone;
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || nn[x] == kNone) continue;
      if (a == kNone || L(a, nn[a]) < L(x, nn[x])) a = x;
    }
    const std::size_t b = nn[a];
    active[b] = 0;
    parent[b] = a;
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a) continue;
      Cosine& ax = L(a, x);
      const Cosine& bx = L(b, x);
      if (bx < ax) ax = bx;
    }
    refresh(a);
    for (std::size_t x = 0; x < a; ++x)
      if (active[x] && (nn[x] == a || nn[x] == b)) refresh(x);
    for (std::size_t x = a + 1; x < b; ++x)
      if (active[x] && nn[x] == b) refresh(x);
  }

  std::vector<std::uint32_t> label(n, 0);
  std::vector<std::uint32_t> root_label(n, 0);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) root_label[i] = next++;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    label[i] = root_label[r];
  }
  return label;
}

}  // namespace flyhash
