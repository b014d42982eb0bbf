#pragma once

#include <cstdint>
#include <random>

namespace iadcps {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not portable across library
/// implementations, so every draw used by this project goes through the
/// conversions below:
///   uniform()      top 53 bits of one engine output, scaled by 2^-53 -> [0,1)
///   below(n)       rejection sampling on the engine output, unbiased in [0,n)
///   gaussian()     Box-Muller on two uniform() draws, caching the second value
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  /// Derives an independent child seed; used to give each stage its own stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace iadcps
