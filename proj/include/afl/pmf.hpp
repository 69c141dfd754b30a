#pragma once

// Finite-alphabet distributions, KL divergence, the tilted family between two
// hypotheses and the log-likelihood-ratio statistic.
//
// Everything is in nats. Probabilities are stored linearly; tilting is done in
// log space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "afl/error.hpp"

namespace afl {

using Symbol = std::uint32_t;
using Count = std::uint64_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPmfTolerance = 1e-12;

/// Probability mass function on symbols 0..m-1, m >= 2.
class Pmf {
 public:
  /// Normalizes `raw` by its sum. Entries that are exactly zero stay zero.
  explicit Pmf(std::vector<double> raw) : probs_(std::move(raw)) {
    if (probs_.size() < 2) {
      throw InvalidArgument("pmf: alphabet must have at least two symbols");
    }
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) {
        throw InvalidArgument("pmf: entries must be finite and non-negative");
      }
      total += p;
    }
    if (!(total > 0.0)) throw InvalidArgument("pmf: entries sum to zero");
    if (total != 1.0) {
      for (double& p : probs_) p /= total;
    }
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t x) const { return probs_[x]; }
  std::span<const double> probs() const noexcept { return probs_; }

  bool approx_equal(const Pmf& other, double tol = kPmfTolerance) const {
    if (size() != other.size()) return false;
    for (std::size_t x = 0; x < size(); ++x) {
      if (std::abs(probs_[x] - other.probs_[x]) > tol) return false;
    }
    return true;
  }

 private:
  std::vector<double> probs_;
};

inline Pmf make_pmf(std::vector<double> raw) { return Pmf(std::move(raw)); }

/// Ber(p) with symbol 1 as the success outcome: {1-p, p}.
inline Pmf bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("bernoulli: p must lie in [0, 1]");
  }
  return Pmf({1.0 - p, p});
}

/// D(p || q) in nats with 0 log(0/a) = 0 and b log(b/0) = +inf.
inline double kl(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw InvalidArgument("kl: alphabet sizes differ");
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] == 0.0) continue;
    if (q[x] == 0.0) return kInf;
    sum += p[x] * std::log(p[x] / q[x]);
  }
  return std::max(sum, 0.0);
}

namespace detail {

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : -kInf; }

// coef * log p with 0 * (-inf) = 0, i.e. the 0^0 = 1 convention.
inline double scaled_log(double coef, double log_p) {
  return coef == 0.0 ? 0.0 : coef * log_p;
}

}  // namespace detail

/// The two simple hypotheses on a shared alphabet.
///
/// Symbols impossible under both hypotheses are removed on construction, so
/// symbol ids refer to the trimmed alphabet; `source_symbol` maps them back.
class HypothesisPair {
 public:
  HypothesisPair(const Pmf& p1, const Pmf& p2) : p1_(p1), p2_(p2) {
    if (p1.size() != p2.size()) {
      throw InvalidArgument("hypothesis pair: alphabet sizes differ");
    }
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t x = 0; x < p1.size(); ++x) {
      if (p1[x] == 0.0 && p2[x] == 0.0) continue;
      a.push_back(p1[x]);
      b.push_back(p2[x]);
      source_.push_back(x);
    }
    if (a.size() < 2) {
      throw InvalidArgument(
          "hypothesis pair: fewer than two symbols have positive probability");
    }
    if (a.size() != p1.size()) {
      p1_ = Pmf(std::move(a));
      p2_ = Pmf(std::move(b));
    }
    const std::size_t m = p1_.size();
    log_p1_.resize(m);
    log_p2_.resize(m);
    llr_.resize(m);
    for (std::size_t x = 0; x < m; ++x) {
      log_p1_[x] = detail::safe_log(p1_[x]);
      log_p2_[x] = detail::safe_log(p2_[x]);
      if (p2_[x] == 0.0) {
        llr_[x] = kInf;
      } else if (p1_[x] == 0.0) {
        llr_[x] = -kInf;
      } else {
        llr_[x] = log_p1_[x] - log_p2_[x];
      }
    }
    kl12_ = kl(p1_, p2_);
    kl21_ = kl(p2_, p1_);
  }

  const Pmf& p1() const noexcept { return p1_; }
  const Pmf& p2() const noexcept { return p2_; }
  std::size_t size() const noexcept { return p1_.size(); }

  std::span<const double> llr() const noexcept { return llr_; }
  std::span<const double> log_p1() const noexcept { return log_p1_; }
  std::span<const double> log_p2() const noexcept { return log_p2_; }
  std::size_t source_symbol(Symbol x) const { return source_.at(x); }

  /// D(P1 || P2).
  double kl12() const noexcept { return kl12_; }
  /// D(P2 || P1).
  double kl21() const noexcept { return kl21_; }

  bool degenerate() const { return p1_.approx_equal(p2_); }
  bool finite_divergences() const {
    return std::isfinite(kl12_) && std::isfinite(kl21_);
  }

 private:
  Pmf p1_;
  Pmf p2_;
  std::vector<std::size_t> source_;
  std::vector<double> log_p1_;
  std::vector<double> log_p2_;
  std::vector<double> llr_;
  double kl12_ = 0.0;
  double kl21_ = 0.0;
};

/// Normalized log-weights of the tilted distribution P1^(1-λ) P2^λ / Z.
inline std::vector<double> log_tilt(const HypothesisPair& pair, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("tilt: lambda must lie in [0, 1]");
  }
  const std::size_t m = pair.size();
  std::vector<double> lw(m);
  double top = -kInf;
  for (std::size_t x = 0; x < m; ++x) {
    lw[x] = detail::scaled_log(1.0 - lambda, pair.log_p1()[x]) +
            detail::scaled_log(lambda, pair.log_p2()[x]);
    top = std::max(top, lw[x]);
  }
  if (top == -kInf) {
    throw InvalidArgument("tilt: supports are disjoint, normalizer is zero");
  }
  double z = 0.0;
  for (double v : lw) z += std::exp(v - top);
  const double log_z = top + std::log(z);
  for (double& v : lw) v -= log_z;
  return lw;
}

/// The λ-tilted distribution; λ = 0 gives P1 and λ = 1 gives P2 exactly.
inline Pmf tilt(const HypothesisPair& pair, double lambda) {
  if (lambda == 0.0) return pair.p1();
  if (lambda == 1.0) return pair.p2();
  std::vector<double> lw = log_tilt(pair, lambda);
  for (double& v : lw) v = std::exp(v);
  return Pmf(std::move(lw));
}

/// D(P^(λ) || P1) and D(P^(λ) || P2).
struct TiltedDivergences {
  double to_p1 = 0.0;
  double to_p2 = 0.0;
};

inline TiltedDivergences tilted_kl(const HypothesisPair& pair, double lambda) {
  if (lambda == 0.0) return {0.0, pair.kl12()};
  if (lambda == 1.0) return {pair.kl21(), 0.0};
  const std::vector<double> lt = log_tilt(pair, lambda);
  TiltedDivergences d;
  for (std::size_t x = 0; x < lt.size(); ++x) {
    if (lt[x] == -kInf) continue;
    const double t = std::exp(lt[x]);
    d.to_p1 += t * (lt[x] - pair.log_p1()[x]);
    d.to_p2 += t * (lt[x] - pair.log_p2()[x]);
  }
  d.to_p1 = std::max(d.to_p1, 0.0);
  d.to_p2 = std::max(d.to_p2, 0.0);
  return d;
}

/// LLR of a type: sum over symbols of counts[x] * log(P1(x)/P2(x)).
///
/// This is the one place the decision statistic is evaluated. Summation runs
/// in symbol order over nonzero counts, so every caller holding the same
/// counts gets the same double, whatever order the samples arrived in.
inline double type_llr(const HypothesisPair& pair,
                       std::span<const Count> counts) {
  if (counts.size() != pair.size()) {
    throw InvalidArgument("llr: count vector does not match alphabet");
  }
  bool pos_inf = false;
  bool neg_inf = false;
  double sum = 0.0;
  for (std::size_t x = 0; x < counts.size(); ++x) {
    if (counts[x] == 0) continue;
    const double l = pair.llr()[x];
    if (l == kInf) {
      pos_inf = true;
    } else if (l == -kInf) {
      neg_inf = true;
    } else {
      sum += static_cast<double>(counts[x]) * l;
    }
  }
  if (pos_inf && neg_inf) {
    throw InvalidArgument("llr: sample is impossible under both hypotheses");
  }
  if (pos_inf) return kInf;
  if (neg_inf) return -kInf;
  return sum;
}

/// Unnormalized LLR of a sample sequence (symbol ids of the trimmed alphabet).
inline double llr_sum(const HypothesisPair& pair,
                      std::span<const Symbol> samples) {
  std::vector<Count> counts(pair.size(), 0);
  for (Symbol x : samples) {
    if (x >= pair.size()) throw InvalidArgument("llr: symbol out of range");
    ++counts[x];
  }
  return type_llr(pair, counts);
}

}  // namespace afl
