#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fedq {

// Deterministic randomness for the whole simulator.
//
// Every consumer draws from its own stream, derived from (global seed,
// domain tag, client id, round). Two properties matter:
//   1. mt19937_64 output is fully specified by the C++ standard, and all
//      value transformations below are hand-rolled, so identical seeds give
//      identical draws on every platform/stdlib. (std::*_distribution and
//      std::shuffle are implementation-defined and are never used.)
//   2. Independent streams mean one subsystem adding or removing draws can
//      never shift another subsystem's sequence (e.g. probe quantization
//      draws never perturb batch shuffling).

// Stream domains. Values are part of the reproducibility contract; append
// only.
enum class rng_domain : std::uint64_t {
  synth_data = 1,
  model_init = 2,
  partition = 3,
  link_rates = 4,
  link_jitter = 5,
  compute_base = 6,
  compute_noise = 7,
  batch_shuffle = 8,
  probe_quant_full = 9,
  probe_quant_aux = 10,
  uplink_quant = 11,
  test = 100,  // free for tests
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class rng_stream {
 public:
  explicit rng_stream(std::uint64_t seed) : gen_(seed) {}

  // Derive the stream for (seed, domain, a, b). a/b are typically client id
  // and round; unused slots stay 0.
  static rng_stream derive(std::uint64_t seed, rng_domain domain,
                           std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(domain));
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return rng_stream(h);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0. Rejection sampling keeps the
  // result exactly uniform.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (no caching: two uniforms per draw keeps
  // the stream layout trivial to reason about).
  double normal() {
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Multiplicative lognormal factor with E[factor] = 1 exactly
  // (mu = -sigma^2/2).
  double lognormal_unit_mean(double sigma) {
    return std::exp(sigma * normal() - 0.5 * sigma * sigma);
  }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedq
