#include "blocksketch/rng.hpp"

#include <cmath>

namespace blocksketch {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ull);
  h = mix64(h ^ mix64(a + 0xbb67ae8584caa73bull));
  h = mix64(h ^ mix64(b + 0x3c6ef372fe94f82bull));
  h = mix64(h ^ mix64(c + 0xa54ff53a5f1d36f1ull));
  return h;
}

std::uint64_t uniform_below(SplitMix64& g, std::uint64_t n) {
  // Lemire's multiply-shift with rejection: unbiased and reproducible.
  std::uint64_t x = g();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    while (lo < threshold) {
      x = g();
      m = static_cast<__uint128_t>(x) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::pair<double, double> gaussian_pair(SplitMix64& g) {
  const double u1 = 1.0 - uniform_unit(g);  // (0, 1], keeps log finite
  const double u2 = uniform_unit(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

std::complex<double> complex_gaussian(SplitMix64& g, double variance) {
  const auto [re, im] = gaussian_pair(g);
  const double s = std::sqrt(variance / 2.0);
  return {s * re, s * im};
}

}  // namespace blocksketch
