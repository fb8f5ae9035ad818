#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace wviab {

/// Deterministic 64-bit generator (splitmix64 core). The sequence depends
/// only on the seed, not on the platform or standard library, which keeps
/// seeded runs reproducible byte for byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream derived from (seed, stream_id). Used to give each
  /// sampled trajectory or test case its own reproducible generator.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  /// Uniform index in [0, n); returns 0 for n == 0.
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a content hash, used to tie tangent vectors to their base measure and
/// to fingerprint scenario inputs and output files.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 14695981039346656037ull);

/// Hash rendered as fixed-width lowercase hex.
std::string fnv1a64_hex(const void* data, std::size_t size);

}  // namespace wviab
