#pragma once

// Error-exponent geometry: the Chernoff point, the fixed-length tradeoff
// curve, the sequential corner, the γ-almost-fixed-length corner and the
// regions reachable by the two-phase test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afl/bisect.hpp"
#include "afl/error.hpp"
#include "afl/pmf.hpp"

namespace afl {

inline constexpr double kDefaultTol = 1e-10;
inline constexpr std::size_t kDefaultGrid = 512;

/// (E1, E2) in nats per sample.
struct ExponentPair {
  double e1 = 0.0;
  double e2 = 0.0;

  friend bool operator==(const ExponentPair&, const ExponentPair&) = default;
};

enum class BoundaryKind { fd_curve, box_corner, envelope };

inline std::string_view to_string(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::fd_curve: return "fd_curve";
    case BoundaryKind::box_corner: return "box_corner";
    case BoundaryKind::envelope: return "envelope";
  }
  return "unknown";
}

/// Upper-right boundary of an exponent region. `lambdas[i]` is the tilt that
/// produced `points[i]`, or NaN when the point is not tied to a tilt.
struct RegionBoundary {
  BoundaryKind kind = BoundaryKind::fd_curve;
  std::vector<ExponentPair> points;
  std::vector<double> lambdas;

  void add(ExponentPair p, double lambda) {
    points.push_back(p);
    lambdas.push_back(lambda);
  }
  std::size_t size() const noexcept { return points.size(); }
};

struct ChernoffPoint {
  double lambda_star = 0.5;
  double d_star = 0.0;
};

/// The γ-almost-fixed-length corner (E1(γ), E2(γ)) and its maximizers.
struct GammaCorner {
  double e1 = 0.0;
  double e2 = 0.0;
  double lambda_a = 1.0;  // D(P^(λ_A) || P2) = γ, maximizes E1
  double lambda_b = 0.0;  // D(P^(λ_B) || P1) = γ, maximizes E2
  bool e1_clamped = false;
  bool e2_clamped = false;
};

/// Every parameter of one concrete two-phase test.
struct TwoPhaseDesign {
  double gamma = 0.0;
  std::size_t k = 1;
  double lambda_a = 0.0;
  double lambda_b = 0.0;
  double alpha1 = 0.0;  // phase-I accept-H1 threshold on LLR/n
  double beta1 = 0.0;   // phase-I accept-H2 threshold on LLR/n
  double phase2_lambda = 0.5;
  double alpha2 = 0.0;  // phase-II threshold on LLR/(kn)
  double e1_target = 0.0;
  double e2_target = 0.0;
};

struct KStar {
  double raw = 0.0;
  std::size_t k_min = 1;
};

inline void require_finite_divergences(const HypothesisPair& pair,
                                       std::string_view what) {
  if (!pair.finite_divergences()) {
    throw InvalidArgument(std::string(what) +
                          ": KL divergence between hypotheses is infinite");
  }
}

/// Fixed-length threshold α(λ) = D(P^(λ)||P2) - D(P^(λ)||P1).
inline double fd_threshold(const HypothesisPair& pair, double lambda) {
  const TiltedDivergences d = tilted_kl(pair, lambda);
  return d.to_p2 - d.to_p1;
}

/// λ* where the two tilted divergences cross, and D* = D(P^(λ*)||P1).
inline ChernoffPoint chernoff(const HypothesisPair& pair,
                              double tol = kDefaultTol) {
  require_finite_divergences(pair, "chernoff");
  if (pair.degenerate()) return {0.5, 0.0};
  const auto gap = [&](double l) {
    const TiltedDivergences d = tilted_kl(pair, l);
    return d.to_p1 - d.to_p2;
  };
  const BisectResult r = bisect_increasing(gap, 0.0, 1.0, tol);
  return {r.x, tilted_kl(pair, r.x).to_p1};
}

/// Points (D(P^(λ)||P1), D(P^(λ)||P2)) on a uniform λ grid, endpoints exact.
inline RegionBoundary fd_boundary(const HypothesisPair& pair,
                                  std::size_t grid = kDefaultGrid) {
  require_finite_divergences(pair, "fd_boundary");
  if (grid < 2) throw InvalidArgument("fd_boundary: grid must be >= 2");
  RegionBoundary b;
  b.kind = BoundaryKind::fd_curve;
  for (std::size_t i = 0; i < grid; ++i) {
    const double lambda =
        i + 1 == grid ? 1.0 : static_cast<double>(i) / (grid - 1);
    const TiltedDivergences d = tilted_kl(pair, lambda);
    b.add({d.to_p1, d.to_p2}, lambda);
  }
  return b;
}

/// Corner (D(P2||P1), D(P1||P2)) of the sequential region.
inline ExponentPair seq_corner(const HypothesisPair& pair) {
  require_finite_divergences(pair, "seq_corner");
  return {pair.kl21(), pair.kl12()};
}

/// E1(γ) = max{D(P^(λ)||P1) : D(P^(λ)||P2) >= γ} and the symmetric E2(γ).
///
/// Both divergences are monotone in λ, so each maximizer is the root of one
/// equality constraint. When γ exceeds the largest attainable divergence the
/// constraint set is empty; the corresponding exponent is reported as 0 at
/// the feasible endpoint and flagged as clamped.
inline GammaCorner e_gamma(const HypothesisPair& pair, double gamma,
                           double tol = kDefaultTol) {
  require_finite_divergences(pair, "e_gamma");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("e_gamma: gamma must be finite and >= 0");
  }
  GammaCorner c;
  if (gamma == 0.0) {
    c.e1 = pair.kl21();
    c.e2 = pair.kl12();
    c.lambda_a = 1.0;
    c.lambda_b = 0.0;
    return c;
  }

  if (gamma > pair.kl12()) {
    c.lambda_a = 0.0;
    c.e1 = 0.0;
    c.e1_clamped = true;
  } else {
    const auto h = [&](double l) { return gamma - tilted_kl(pair, l).to_p2; };
    c.lambda_a = bisect_increasing(h, 0.0, 1.0, tol).x;
    c.e1 = tilted_kl(pair, c.lambda_a).to_p1;
  }

  if (gamma > pair.kl21()) {
    c.lambda_b = 1.0;
    c.e2 = 0.0;
    c.e2_clamped = true;
  } else {
    const auto h = [&](double l) { return tilted_kl(pair, l).to_p1 - gamma; };
    c.lambda_b = bisect_increasing(h, 0.0, 1.0, tol).x;
    c.e2 = tilted_kl(pair, c.lambda_b).to_p2;
  }
  return c;
}

/// Pareto frontier of the union of `curves`, sorted by increasing e1.
inline RegionBoundary region_envelope(std::span<const RegionBoundary> curves) {
  struct Item {
    ExponentPair p;
    double lambda;
  };
  std::vector<Item> items;
  for (const RegionBoundary& c : curves) {
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const ExponentPair& p = c.points[i];
      if (!std::isfinite(p.e1) || !std::isfinite(p.e2)) {
        throw InvalidArgument("region_envelope: non-finite point");
      }
      items.push_back({p, i < c.lambdas.size()
                              ? c.lambdas[i]
                              : std::numeric_limits<double>::quiet_NaN()});
    }
  }
  if (items.empty()) throw InvalidArgument("region_envelope: no points");

  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.p.e1 != b.p.e1) return a.p.e1 > b.p.e1;
    return a.p.e2 > b.p.e2;
  });
  RegionBoundary out;
  out.kind = BoundaryKind::envelope;
  double best_e2 = -kInf;
  for (const Item& it : items) {
    if (it.p.e2 > best_e2) {
      out.add(it.p, it.lambda);
      best_e2 = it.p.e2;
    }
  }
  std::reverse(out.points.begin(), out.points.end());
  std::reverse(out.lambdas.begin(), out.lambdas.end());
  return out;
}

inline RegionBoundary region_envelope(std::initializer_list<RegionBoundary> curves) {
  return region_envelope(std::span<const RegionBoundary>(curves.begin(), curves.size()));
}

/// True if some point of `region` weakly dominates `p` up to `tol`.
inline bool covers(const RegionBoundary& region, ExponentPair p,
                   double tol = 0.0) {
  return std::any_of(region.points.begin(), region.points.end(),
                     [&](const ExponentPair& q) {
                       return q.e1 >= p.e1 - tol && q.e2 >= p.e2 - tol;
                     });
}

/// Every point of `inner` is covered by `outer`.
inline bool contains(const RegionBoundary& outer, const RegionBoundary& inner,
                     double tol = 0.0) {
  return std::all_of(inner.points.begin(), inner.points.end(),
                     [&](const ExponentPair& p) { return covers(outer, p, tol); });
}

inline bool strictly_contains(const RegionBoundary& outer,
                              const RegionBoundary& inner, double tol = 0.0) {
  return contains(outer, inner, tol) && !contains(inner, outer, tol);
}

/// Envelope of the fixed-length curve united with the box below (E1(γ), E2(γ)).
inline RegionBoundary gamma_region(const HypothesisPair& pair, double gamma,
                                   std::size_t grid = kDefaultGrid,
                                   double tol = kDefaultTol) {
  const GammaCorner c = e_gamma(pair, gamma, tol);
  RegionBoundary fd = fd_boundary(pair, grid);
  // λ_A < λ_B means every λ in between gives a curve point dominating the
  // corner: the box adds nothing to the fixed-length region.
  if (c.lambda_a < c.lambda_b) return region_envelope({fd});
  RegionBoundary box;
  box.kind = BoundaryKind::box_corner;
  box.add({c.e1, c.e2}, std::numeric_limits<double>::quiet_NaN());
  return region_envelope({fd, box});
}

/// Thresholds of the two-phase test for 0 < γ <= D*.
///
/// Phase I accepts H1 when LLR/n >= α1 = α(λ_B) and H2 when LLR/n <= β1 =
/// α(λ_A). With this assignment α1 >= β1, the phase-I error exponents are
/// E1(γ), E2(γ) and both continuation exponents equal γ. Leaving
/// `phase2_lambda` unset uses λ* with α2 = 0.
inline TwoPhaseDesign two_phase_design(
    const HypothesisPair& pair, double gamma, std::size_t k,
    std::optional<double> phase2_lambda = std::nullopt,
    double tol = kDefaultTol) {
  require_finite_divergences(pair, "two_phase_design");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("two_phase_design: gamma must be > 0");
  }
  if (k == 0) throw InvalidArgument("two_phase_design: k must be >= 1");
  const ChernoffPoint cp = chernoff(pair, tol);
  if (gamma > cp.d_star + tol) {
    throw InvalidArgument(
        "two_phase_design: gamma exceeds the Chernoff exponent D*; the "
        "two-phase test degenerates, use a fixed-length test");
  }

  TwoPhaseDesign d;
  d.gamma = gamma;
  d.k = k;
  if (std::abs(gamma - cp.d_star) <= tol) {
    d.lambda_a = d.lambda_b = cp.lambda_star;
    d.e1_target = d.e2_target = cp.d_star;
    d.alpha1 = d.beta1 = fd_threshold(pair, cp.lambda_star);
  } else {
    const GammaCorner c = e_gamma(pair, gamma, tol);
    d.lambda_a = c.lambda_a;
    d.lambda_b = c.lambda_b;
    d.e1_target = c.e1;
    d.e2_target = c.e2;
    d.alpha1 = fd_threshold(pair, c.lambda_b);
    d.beta1 = fd_threshold(pair, c.lambda_a);
  }

  if (phase2_lambda) {
    if (!(*phase2_lambda >= 0.0 && *phase2_lambda <= 1.0)) {
      throw InvalidArgument("two_phase_design: phase2_lambda must lie in [0, 1]");
    }
    d.phase2_lambda = *phase2_lambda;
    d.alpha2 = fd_threshold(pair, *phase2_lambda);
  } else {
    d.phase2_lambda = cp.lambda_star;
    d.alpha2 = 0.0;
  }
  return d;
}

/// k* = max{D(P2||P1), D(P1||P2)} / D* and the smallest usable integer k.
inline KStar kstar(const HypothesisPair& pair, double tol = kDefaultTol) {
  const ChernoffPoint cp = chernoff(pair, tol);
  if (!(cp.d_star > 0.0)) {
    throw InvalidArgument("kstar: D* = 0, hypotheses are identical");
  }
  KStar ks;
  ks.raw = std::max(pair.kl21(), pair.kl12()) / cp.d_star;
  ks.k_min = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ks.raw)));
  return ks;
}

/// Exponents reached by the two-phase test as the phase-II tilt sweeps [0,1]
/// (λ* always included): (min{E1(γ), γ + k D(P^(λ)||P1)},
/// min{E2(γ), γ + k D(P^(λ)||P2)}), reduced to its envelope.
inline RegionBoundary two_phase_region(const HypothesisPair& pair, double gamma,
                                       std::size_t k,
                                       std::size_t grid = kDefaultGrid,
                                       double tol = kDefaultTol) {
  const TwoPhaseDesign d = two_phase_design(pair, gamma, k, std::nullopt, tol);
  if (grid < 2) throw InvalidArgument("two_phase_region: grid must be >= 2");
  std::vector<double> lambdas;
  lambdas.reserve(grid + 1);
  for (std::size_t i = 0; i < grid; ++i) {
    lambdas.push_back(i + 1 == grid ? 1.0 : static_cast<double>(i) / (grid - 1));
  }
  lambdas.push_back(d.phase2_lambda);
  std::sort(lambdas.begin(), lambdas.end());

  RegionBoundary sweep;
  sweep.kind = BoundaryKind::envelope;
  const double kk = static_cast<double>(k);
  for (double l : lambdas) {
    const TiltedDivergences t = tilted_kl(pair, l);
    sweep.add({std::min(d.e1_target, gamma + kk * t.to_p1),
               std::min(d.e2_target, gamma + kk * t.to_p2)},
              l);
  }
  return region_envelope({sweep});
}

}  // namespace afl
