#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace ompr {

// Self-contained pseudo-random machinery. We deliberately avoid the <random>
// distributions: their output sequences are implementation defined, and the
// harness promises byte-identical reports for a given master seed on any
// platform. Everything below is fully specified by this header.

// SplitMix64 finalizer, used both to expand seeds and as the mixing step of
// the counter-based seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Splittable counter-based derivation: hash of (seed, counter). Trials and
// sub-streams get independent seeds without any sequential RNG state, which
// keeps parallel execution order-independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return mix64(seed ^ (0x9E3779B97F4A7C15ull + mix64(counter)));
}

// xoshiro256++ (Blackman & Vigna), seeded through SplitMix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed = 0) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = s;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1); never returns 0, safe under log().
  double next_open01() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Uniform index in [0, bound). Multiply-shift; the bias is < bound/2^64.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  double next_sign() { return (next_u64() >> 63) ? -1.0 : 1.0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

namespace detail {

// Ziggurat tables for the standard normal, 128 blocks of equal area
// (Marsaglia & Tsang layout, constants from Doornik's ZIGNOR writeup).
struct ZigguratTables {
  static constexpr int kBlocks = 128;
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;

  double x[kBlocks + 1];
  double ratio[kBlocks];

  ZigguratTables() {
    const double f_r = std::exp(-0.5 * kR * kR);
    x[0] = kV / f_r;
    x[1] = kR;
    x[kBlocks] = 0.0;
    for (int i = 2; i < kBlocks; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + std::exp(-0.5 * x[i - 1] * x[i - 1])));
    }
    for (int i = 0; i < kBlocks; ++i) ratio[i] = x[i + 1] / x[i];
  }

  static const ZigguratTables& instance() {
    static const ZigguratTables tables;
    return tables;
  }
};

}  // namespace detail

// Standard normal sampler over a Xoshiro engine. One 64-bit draw covers the
// common rectangle case; wedge and tail corrections draw fresh uniforms.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    const auto& t = detail::ZigguratTables::instance();
    for (;;) {
      const std::uint64_t bits = engine_.next_u64();
      const int i = static_cast<int>(bits & 127u);
      const double u = static_cast<double>(static_cast<std::int64_t>(bits)) * 0x1.0p-63;
      if (std::fabs(u) < t.ratio[i]) return u * t.x[i];
      if (i == 0) return tail(u < 0.0);
      const double xx = u * t.x[i];
      const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - xx * xx));
      const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - xx * xx));
      if (f1 + engine_.next_open01() * (f0 - f1) < 1.0) return xx;
    }
  }

  Xoshiro256pp& engine() { return engine_; }

 private:
  double tail(bool negative) {
    double a, b;
    do {
      a = std::log(engine_.next_open01()) / detail::ZigguratTables::kR;
      b = std::log(engine_.next_open01());
    } while (-2.0 * b < a * a);
    return negative ? a - detail::ZigguratTables::kR : detail::ZigguratTables::kR - a;
  }

  Xoshiro256pp engine_;
};

}  // namespace ompr
