#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace depthlab {

/// Deterministic RNG with pinned value mappings (no reliance on
/// implementation-defined std distributions), so seeded runs reproduce
/// bit-exactly.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0,1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    // modulo bias is irrelevant at these ranges vs 2^64
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  bool coin() { return (next_u64() & 1ull) != 0; }

  /// Box-Muller without caching; consumes two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

/// Derives an independent stream seed from (base, tag, index). Streams with
/// different tags never overlap, which keeps e.g. discriminator init from
/// perturbing data order.
uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0);

}  // namespace depthlab
