#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace prototrace {

// Portable random stream. The std distributions are implementation-defined,
// so draws are derived from raw mt19937_64 output to keep files written on
// different toolchains byte-identical.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);

  /// Standard normal (Box-Muller, one value per call).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

private:
  std::mt19937_64 engine_;
};

}  // namespace prototrace
