#pragma once

// Platform-stable random numbers. std::mt19937_64 is fully specified by the
// standard; the std distributions are not, so the few we need are written
// out here.

#include <cstdint>
#include <random>
#include <string>

namespace hpnet {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi);
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
  }

  std::string serialize() const;
  void deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser over (seed, index); used to derive per-item seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace hpnet
