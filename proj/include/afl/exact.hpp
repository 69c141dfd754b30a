#pragma once

// Exact error, rejection and continuation probabilities by enumerating type
// classes (compositions of n), plus a forward dynamic program for the
// truncated SPRT. All accumulation happens in log space.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "afl/decision.hpp"
#include "afl/error.hpp"
#include "afl/exponents.hpp"
#include "afl/pmf.hpp"
#include "afl/testbench.hpp"

namespace afl {

/// Largest number of type classes (or DP states) an exact computation visits.
inline constexpr double kExactGuard = 1e7;

/// SPRT states whose accumulated LLR agrees on this lattice are merged.
inline constexpr double kSprtLattice = 1e-9;

/// A probability held by its natural log so deep tails do not underflow.
struct LogProb {
  double log = -kInf;

  double value() const { return std::exp(log); }
  /// -ln(p)/n in nats per sample.
  double exponent(std::size_t n) const { return -log / static_cast<double>(n); }
};

inline double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// Running log-sum-exp. Deterministic for a fixed insertion order.
class LogSumExp {
 public:
  void add(double log_v) {
    if (log_v == -kInf) return;
    if (log_v > max_) {
      sum_ = sum_ * std::exp(max_ - log_v) + 1.0;
      max_ = log_v;
    } else {
      sum_ += std::exp(log_v - max_);
    }
  }
  double log() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
};

/// Exact (or exactly computed) outcome probabilities of one test.
/// pX_* are probabilities under hypothesis X; `n` normalizes exponents.
struct ErrorReport {
  std::size_t n = 0;
  LogProb p1_err;       // P1(choose H2)
  LogProb p2_err;       // P2(choose H1)
  LogProb p1_continue;  // P1(tau > n)
  LogProb p2_continue;
  LogProb p1_reject;    // P1(reject both)
  LogProb p2_reject;
  LogProb p1_correct;   // P1(choose H1)
  LogProb p2_correct;   // P2(choose H2)
};

/// Number of compositions of n into m parts, C(n+m-1, m-1).
inline double composition_count(std::size_t n, std::size_t m) {
  return std::exp(std::lgamma(static_cast<double>(n + m)) -
                  std::lgamma(static_cast<double>(n + 1)) -
                  std::lgamma(static_cast<double>(m)));
}

inline void check_enumeration_guard(std::size_t n, std::size_t m) {
  const double count = composition_count(n, m);
  if (count > kExactGuard * (1.0 + 1e-9)) {
    throw GuardExceeded("type enumeration for n=" + std::to_string(n) +
                            ", alphabet " + std::to_string(m),
                        count, kExactGuard);
  }
}

/// Calls visit(counts, log P1(type class), log P2(type class)) for every
/// composition of n over the pair's alphabet.
template <class Visit>
void for_each_type(const HypothesisPair& pair, std::size_t n, Visit&& visit) {
  const std::size_t m = pair.size();
  check_enumeration_guard(n, m);
  std::vector<double> log_fact(n + 1);
  for (std::size_t c = 0; c <= n; ++c) {
    log_fact[c] = std::lgamma(static_cast<double>(c) + 1.0);
  }
  const auto lp1 = pair.log_p1();
  const auto lp2 = pair.log_p2();
  std::vector<Count> counts(m, 0);

  auto rec = [&](auto& self, std::size_t x, std::size_t remaining, double lw,
                 double l1, double l2) -> void {
    if (x + 1 == m) {
      counts[x] = remaining;
      const double c = static_cast<double>(remaining);
      const double base = log_fact[n] + lw - log_fact[remaining];
      visit(std::span<const Count>(counts),
            base + l1 + detail::scaled_log(c, lp1[x]),
            base + l2 + detail::scaled_log(c, lp2[x]));
      return;
    }
    for (std::size_t cnt = 0; cnt <= remaining; ++cnt) {
      counts[x] = cnt;
      const double c = static_cast<double>(cnt);
      self(self, x + 1, remaining - cnt, lw - log_fact[cnt],
           l1 + detail::scaled_log(c, lp1[x]), l2 + detail::scaled_log(c, lp2[x]));
    }
  };
  rec(rec, 0, n, 0.0, 0.0, 0.0);
}

/// Log-probabilities of the three band outcomes of LLR/len under each
/// hypothesis, indexed by BandSide.
struct BandProbabilities {
  std::array<double, 3> h1{-kInf, -kInf, -kInf};
  std::array<double, 3> h2{-kInf, -kInf, -kInf};

  double under(Hypothesis h, BandSide side) const {
    return (h == Hypothesis::h1 ? h1 : h2)[static_cast<std::size_t>(side)];
  }
};

inline BandProbabilities band_probabilities(const HypothesisPair& pair,
                                            std::size_t len, double upper,
                                            double lower) {
  if (len == 0) throw InvalidArgument("exact: window length must be >= 1");
  std::array<LogSumExp, 3> acc1;
  std::array<LogSumExp, 3> acc2;
  for_each_type(pair, len, [&](std::span<const Count> counts, double l1, double l2) {
    if (l1 == -kInf && l2 == -kInf) return;
    const double stat = normalized_statistic(type_llr(pair, counts), len);
    const auto side = static_cast<std::size_t>(classify_band(stat, upper, lower));
    acc1[side].add(l1);
    acc2[side].add(l2);
  });
  BandProbabilities out;
  // Rounding in the sum can push a near-certain band just above log 1.
  for (std::size_t i = 0; i < 3; ++i) {
    out.h1[i] = std::min(acc1[i].log(), 0.0);
    out.h2[i] = std::min(acc2[i].log(), 0.0);
  }
  return out;
}

namespace detail {

inline constexpr auto kAcceptH1 = static_cast<std::size_t>(BandSide::accept_h1);
inline constexpr auto kAcceptH2 = static_cast<std::size_t>(BandSide::accept_h2);
inline constexpr auto kInside = static_cast<std::size_t>(BandSide::inside);

}  // namespace detail

/// Fixed-length test: H1 iff LLR/n >= alpha.
inline ErrorReport exact_fixed(const HypothesisPair& pair, std::size_t n,
                               double alpha) {
  const BandProbabilities b = band_probabilities(pair, n, alpha, alpha);
  ErrorReport r;
  r.n = n;
  r.p1_err.log = b.h1[detail::kAcceptH2];
  r.p1_correct.log = b.h1[detail::kAcceptH1];
  r.p2_err.log = b.h2[detail::kAcceptH1];
  r.p2_correct.log = b.h2[detail::kAcceptH2];
  return r;
}

/// Fixed-length test that rejects both hypotheses strictly inside (beta, alpha).
inline ErrorReport exact_rejection(const HypothesisPair& pair, std::size_t n,
                                   double alpha, double beta) {
  if (alpha < beta) throw InvalidArgument("exact_rejection: alpha < beta");
  const BandProbabilities b = band_probabilities(pair, n, alpha, beta);
  ErrorReport r;
  r.n = n;
  r.p1_err.log = b.h1[detail::kAcceptH2];
  r.p1_correct.log = b.h1[detail::kAcceptH1];
  r.p1_reject.log = b.h1[detail::kInside];
  r.p2_err.log = b.h2[detail::kAcceptH1];
  r.p2_correct.log = b.h2[detail::kAcceptH2];
  r.p2_reject.log = b.h2[detail::kInside];
  return r;
}

/// Two-phase test. Phase II uses only the kn fresh samples, so
/// P1(A2) = P1(phase I says H2) + P1(continue) * P1(phase II says H2),
/// and symmetrically under H2.
inline ErrorReport exact_two_phase(const HypothesisPair& pair,
                                   const TwoPhaseDesign& design, std::size_t n) {
  if (n == 0) throw InvalidArgument("exact_two_phase: n must be >= 1");
  if (design.k == 0) throw InvalidArgument("exact_two_phase: k must be >= 1");
  const bool has_band = design.alpha1 > design.beta1;
  check_enumeration_guard(n, pair.size());
  if (has_band) check_enumeration_guard(design.k * n, pair.size());

  const BandProbabilities one =
      band_probabilities(pair, n, design.alpha1, design.beta1);
  BandProbabilities two;  // all -inf: never reached without a band
  if (has_band) {
    two = band_probabilities(pair, design.k * n, design.alpha2, design.alpha2);
  }
  using detail::kAcceptH1;
  using detail::kAcceptH2;
  using detail::kInside;

  ErrorReport r;
  r.n = n;
  r.p1_continue.log = one.h1[kInside];
  r.p2_continue.log = one.h2[kInside];
  r.p1_err.log = log_add(one.h1[kAcceptH2], one.h1[kInside] + two.h1[kAcceptH2]);
  r.p1_correct.log = log_add(one.h1[kAcceptH1], one.h1[kInside] + two.h1[kAcceptH1]);
  r.p2_err.log = log_add(one.h2[kAcceptH1], one.h2[kInside] + two.h2[kAcceptH1]);
  r.p2_correct.log = log_add(one.h2[kAcceptH2], one.h2[kInside] + two.h2[kAcceptH2]);
  return r;
}

/// Truncated SPRT by a forward dynamic program over accumulated LLR.
///
/// States are count vectors; states whose LLR agrees on a 1e-9 lattice are
/// merged (exact when distinct types give distinct sums). The representative
/// count vector of each state feeds the shared LLR helper, so absorption
/// matches run_sprt tie for tie. pX_continue is P(tau > n).
inline ErrorReport exact_sprt_truncated(const HypothesisPair& pair,
                                        const SprtConfig& cfg) {
  const SprtThresholds th = sprt_thresholds(pair, cfg);
  const std::size_t m = pair.size();

  struct State {
    std::vector<Count> counts;
    double mass1 = 0.0;
    double mass2 = 0.0;
  };
  std::map<std::int64_t, State> current;
  current.emplace(0, State{std::vector<Count>(m, 0), 1.0, 1.0});

  // [hypothesis][decision]: probability of deciding H1 / H2.
  double decided[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  double beyond_n[2] = {0.0, 0.0};  // mass still running after n samples
  double visited = 0.0;
  for (std::size_t t = 1; t <= cfg.max_samples && !current.empty(); ++t) {
    std::map<std::int64_t, State> next;
    const bool last = t == cfg.max_samples;
    for (const auto& [key, st] : current) {
      for (std::size_t x = 0; x < m; ++x) {
        const double w1 = st.mass1 * pair.p1()[x];
        const double w2 = st.mass2 * pair.p2()[x];
        if (w1 == 0.0 && w2 == 0.0) continue;
        std::vector<Count> counts = st.counts;
        ++counts[x];
        const double s = type_llr(pair, counts);
        int decision = -1;
        if (s >= th.upper) {
          decision = 0;
        } else if (s <= th.lower) {
          decision = 1;
        } else if (last) {
          decision = threshold_decision(s, 0.0) == Decision::choose_h1 ? 0 : 1;
        }
        if (decision >= 0) {
          decided[0][decision] += w1;
          decided[1][decision] += w2;
          continue;
        }
        const auto lattice = static_cast<std::int64_t>(std::llround(s / kSprtLattice));
        auto [it, inserted] = next.try_emplace(lattice);
        if (inserted) it->second.counts = std::move(counts);
        it->second.mass1 += w1;
        it->second.mass2 += w2;
      }
    }
    visited += static_cast<double>(next.size());
    if (visited > kExactGuard) {
      throw GuardExceeded("sprt dynamic program state count", visited, kExactGuard);
    }
    current = std::move(next);
    if (t == cfg.n) {
      for (const auto& [key, st] : current) {
        beyond_n[0] += st.mass1;
        beyond_n[1] += st.mass2;
      }
    }
  }

  const auto lg = [](double p) { return p > 0.0 ? std::log(p) : -kInf; };
  ErrorReport r;
  r.n = cfg.n;
  r.p1_correct.log = lg(decided[0][0]);
  r.p1_err.log = lg(decided[0][1]);
  r.p2_err.log = lg(decided[1][0]);
  r.p2_correct.log = lg(decided[1][1]);
  r.p1_continue.log = lg(beyond_n[0]);
  r.p2_continue.log = lg(beyond_n[1]);
  return r;
}

inline ErrorReport exact_report(const HypothesisPair& pair, const TestConfig& test) {
  validate_test(pair, test);
  struct Dispatch {
    const HypothesisPair& pair;
    ErrorReport operator()(const FixedTest& t) const { return exact_fixed(pair, t.n, t.alpha); }
    ErrorReport operator()(const SprtConfig& t) const { return exact_sprt_truncated(pair, t); }
    ErrorReport operator()(const TwoPhaseTest& t) const {
      return exact_two_phase(pair, t.design, t.n);
    }
    ErrorReport operator()(const RejectionTest& t) const {
      return exact_rejection(pair, t.n, t.alpha, t.beta);
    }
  };
  return std::visit(Dispatch{pair}, test);
}

/// Probability of an erroneous decision under `truth`.
inline LogProb error_probability(const ErrorReport& r, Hypothesis truth) {
  return truth == Hypothesis::h1 ? r.p1_err : r.p2_err;
}

inline LogProb continue_probability(const ErrorReport& r, Hypothesis truth) {
  return truth == Hypothesis::h1 ? r.p1_continue : r.p2_continue;
}

/// Least-squares line through (n, -ln p); the slope estimates the exponent.
struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
  bool infinite = false;  // some probability was exactly zero
  std::size_t points = 0;
};

/// Fits points given as (n, ln p).
inline ExponentFit exponent_fit_log(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw InvalidArgument("exponent_fit: need at least two points");
  ExponentFit fit;
  fit.points = points.size();
  for (const auto& [n, lp] : points) {
    if (!(lp <= 0.0) || std::isnan(lp)) {
      throw InvalidArgument("exponent_fit: probabilities must lie in [0, 1]");
    }
    if (lp == -kInf) fit.infinite = true;
  }
  if (fit.infinite) {
    fit.slope = kInf;
    fit.intercept = 0.0;
    fit.r2 = 0.0;
    return fit;
  }
  const double count = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [n, lp] : points) {
    mx += n;
    my += -lp;
  }
  mx /= count;
  my /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [n, lp] : points) {
    const double dx = n - mx;
    const double dy = -lp - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InvalidArgument("exponent_fit: all n values are equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (const auto& [n, lp] : points) {
    const double e = -lp - (fit.intercept + fit.slope * n);
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

/// Fits points given as (n, p).
inline ExponentFit exponent_fit(std::span<const std::pair<double, double>> points) {
  std::vector<std::pair<double, double>> logs;
  logs.reserve(points.size());
  for (const auto& [n, p] : points) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument("exponent_fit: probabilities must lie in [0, 1]");
    }
    logs.emplace_back(n, p > 0.0 ? std::log(p) : -kInf);
  }
  return exponent_fit_log(logs);
}

/// Stopping-time moments of a two-phase test with continuation probability q:
/// tau/n is 1 with probability 1-q and k+1 with probability q.
struct TauMoments {
  std::map<int, double> scaled;  // l -> E[(tau/n)^l]
  double mean = 0.0;
  double variance = 0.0;
};

inline TauMoments two_phase_tau_moments(double q, std::size_t n, std::size_t k,
                                        std::span<const int> orders) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("tau moments: q must lie in [0, 1]");
  TauMoments t;
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  for (int l : orders) {
    if (l < 1) throw InvalidArgument("tau moments: orders must be >= 1");
    t.scaled[l] = (1.0 - q) + q * std::pow(kk + 1.0, l);
  }
  t.mean = nn * (1.0 + kk * q);
  t.variance = kk * kk * nn * nn * q * (1.0 - q);
  return t;
}

}  // namespace afl
