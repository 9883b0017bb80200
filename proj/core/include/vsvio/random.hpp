#pragma once

#include <cstdint>
#include <random>

namespace vsvio {

/// Seeded random stream. Wraps std::mt19937_64 (whose output sequence is
/// fixed by the standard) and derives uniforms/normals from raw bits, so
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one cached value).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream, deterministic in (this seed, stream id).
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace vsvio
