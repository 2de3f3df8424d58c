#pragma once

// Deterministic random sampling. Every draw goes through the helpers below
// instead of std::uniform_*_distribution, whose output is implementation
// defined; mt19937_64 itself is fully specified, so identical seeds produce
// identical streams on every platform and standard library.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pathgnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Hash a base seed together with stream ids into an independent seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ull));
  h = splitmix64(h ^ (b + 0x94d049bb133111ebull));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: lo > hi");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Fisher-Yates shuffle driven by this stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent child stream. Does not advance or depend on draws from *this,
  /// so forked work can run in any order (or in parallel) without changing
  /// results.
  Rng fork(std::uint64_t stream, std::uint64_t substream = 0) const {
    return Rng(mix_seed(seed_, stream, substream));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace pathgnn
