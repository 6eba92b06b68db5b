#pragma once

#include <complex>
#include <cstdint>
#include <utility>

namespace blocksketch {

// Counter-style 64-bit generator (splitmix64). Small enough to create one per
// trial, and deterministic across platforms, which is what the reproducibility
// contract of the experiment driver rests on.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream from a master seed and up to three indices
// (e.g. sweep point, trial, role). Workers can seed themselves without any
// coordination; the mapping is pure, so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Uniform double in [0, 1).
inline double uniform_unit(SplitMix64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_below(SplitMix64& g, std::uint64_t n);

// Uniform integer in [lo, hi], inclusive.
inline int uniform_int(SplitMix64& g, int lo, int hi) {
  return lo + static_cast<int>(uniform_below(g, static_cast<std::uint64_t>(hi - lo) + 1));
}

// Two independent standard normals (Box-Muller). Hand-rolled rather than
// std::normal_distribution so that streams are identical across standard
// library implementations.
std::pair<double, double> gaussian_pair(SplitMix64& g);

inline double gaussian(SplitMix64& g) { return gaussian_pair(g).first; }

// Circularly symmetric complex normal with E|z|^2 = variance.
std::complex<double> complex_gaussian(SplitMix64& g, double variance = 1.0);

}  // namespace blocksketch
