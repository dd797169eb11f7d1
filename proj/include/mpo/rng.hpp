#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace mpo {

// One mixing step of splitmix64; also used to derive decorrelated child
// seeds from (seed, tag) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// FNV-1a over the tag bytes, fed through splitmix64.
constexpr std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return splitmix64(h);
}

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is pinned by the C++ standard; every draw helper is implemented
// by hand on its raw 64-bit output because the standard distributions
// (uniform_int_distribution, shuffle, ...) are implementation-defined and
// would break cross-platform reproducibility.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed_value() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform_real(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
  }

  // Uniform integer in [0, bound), bound > 0. Lemire's unbiased multiply-
  // and-reject method.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform integer in [lo, hi], inclusive on both ends.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo +
           static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool chance(double p) { return uniform_real() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(below(v.size()))];
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child stream decorrelated from this one by a tag (plus an optional
  // index for families of streams). Depends only on the parent's seed, not
  // on how many draws the parent has made.
  RngStream split(std::string_view tag) const {
    return RngStream(splitmix64(seed_ ^ tag_hash(tag)));
  }
  RngStream split(std::string_view tag, std::uint64_t index) const {
    return RngStream(splitmix64(splitmix64(seed_ ^ tag_hash(tag)) + index));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace mpo
