#pragma once

#include <cstdint>
#include <random>

namespace deeppet {

/// Seedable generator used for every stochastic step in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions below are implemented here rather than taken
/// from <random> because the standard library's distributions are
/// implementation-defined, and simulated datasets must be byte-identical
/// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Poisson variate. Inversion for mean < 30; rounded normal approximation
  /// clamped at zero otherwise.
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for the stream identified by (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace deeppet
