#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vda {

/// Seeded random source with platform-independent distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std::*_distribution adaptors are implementation-defined, so
/// the conversions below are written out to keep runs bit-reproducible across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a master seed and a stream id.
  static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over a byte string, stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace vda
