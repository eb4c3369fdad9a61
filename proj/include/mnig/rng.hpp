#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace mnig {

/// Seeded random stream. Identical (seed, stream id) pairs produce identical
/// variate sequences on every platform: the engine is mt19937_64 and all
/// derived variates (uniform, normal, gamma, ...) are computed in this
/// library instead of through the implementation-defined std distributions.
///
/// A stream is not thread-safe; give each concurrent worker its own stream.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal (Marsaglia polar method).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mnig
