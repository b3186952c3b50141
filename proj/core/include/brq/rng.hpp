// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#ifndef BRQ_RNG_HPP
#define BRQ_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace brq {

// One splitmix64 step. Used for seed derivation only.
std::uint64_t splitmix64(std::uint64_t& state);

// Derive an independent substream seed from (base, tag, a, b).
// Same inputs always give the same seed; different tags/indices give
// unrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact per the
// standard); all distributions are implemented here because the standard
// library's distribution outputs are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller; the spare value is cached.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double xavier_uniform(int fan_in, int fan_out);

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_int(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace brq

#endif  // BRQ_RNG_HPP
