#pragma once

/**
 * @file rng.hpp
 * @brief Seeded random stream with platform-independent draws.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. The standard distributions are not, so uniform and normal draws
 * are derived here from raw engine output:
 *
 *  - uniform01: top 53 bits of one engine word, scaled by 2^-53.
 *  - normal: Marsaglia polar method on pairs of uniform01 draws; the spare
 *    variate is cached and counts as part of the stream state.
 *  - uniform_index: rejection sampling on raw engine words.
 *
 * Identical (seed, position) gives identical subsequent draws on every
 * platform.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

namespace fedzen {

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  /// Stream for trial `index` of an experiment seeded with `seed`.
  static RngStream derive(std::uint64_t seed, std::uint64_t index) {
    return RngStream(seed + index);
  }

  std::uint64_t seed() const { return seed_; }
  /// Number of raw engine words consumed so far.
  std::uint64_t position() const { return position_; }

  std::uint64_t next_word() {
    ++position_;
    return engine_();
  }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_word() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t w;
    do {
      w = next_word();
    } while (w >= limit);
    return w % n;
  }

  /// Standard normal variate.
  double normal() {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    return u * factor;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace fedzen
