#pragma once

// Counter-keyed random streams: every simulated trial owns a generator whose
// state is a pure function of (master seed, hypothesis, trial index), so the
// schedule of trials across workers cannot change any result.

#include <cstdint>
#include <vector>

#include "afl/decision.hpp"
#include "afl/error.hpp"
#include "afl/pmf.hpp"

namespace afl {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

struct SeedSpec {
  std::uint64_t master_seed = 0;
};

inline SplitMix64 trial_stream(SeedSpec seed, Hypothesis truth,
                               std::uint64_t trial) noexcept {
  const std::uint64_t key =
      mix64(seed.master_seed) ^ (2 * trial + static_cast<std::uint64_t>(truth));
  return SplitMix64(mix64(key));
}

/// Inverse-CDF sampling over a small alphabet.
class SymbolSampler {
 public:
  explicit SymbolSampler(const Pmf& pmf) : cdf_(pmf.size()) {
    double acc = 0.0;
    for (std::size_t x = 0; x < pmf.size(); ++x) {
      acc += pmf[x];
      cdf_[x] = acc;
    }
    // The last symbol with positive mass absorbs rounding in the tail.
    for (std::size_t x = pmf.size(); x-- > 0;) {
      cdf_[x] = 1.0;
      if (pmf[x] > 0.0) break;
    }
  }

  Symbol operator()(SplitMix64& rng) const noexcept {
    const double u = rng.uniform();
    Symbol x = 0;
    while (u >= cdf_[x]) ++x;
    return x;
  }

 private:
  std::vector<double> cdf_;
};

/// Infinite i.i.d. stream from one sampler.
class RandomSource {
 public:
  RandomSource(const SymbolSampler& sampler, SplitMix64 rng)
      : sampler_(&sampler), rng_(rng) {}

  Symbol next() noexcept { return (*sampler_)(rng_); }

 private:
  const SymbolSampler* sampler_;
  SplitMix64 rng_;
};

}  // namespace afl
