#pragma once

// Independent reference computations. Nothing here calls into the library's
// numerics: long-double direct sums, dense grid scans and brute-force
// sequence enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline long double kl(const Vec& p, const Vec& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return INFINITY;
    s += static_cast<long double>(p[i]) *
         std::log(static_cast<long double>(p[i]) / static_cast<long double>(q[i]));
  }
  return s;
}

inline std::vector<long double> tilt(const Vec& p1, const Vec& p2, long double lam) {
  std::vector<long double> t(p1.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const long double a = p1[i] == 0.0 ? (lam == 1.0L ? 1.0L : 0.0L) : std::pow((long double)p1[i], 1.0L - lam);
    const long double b = p2[i] == 0.0 ? (lam == 0.0L ? 1.0L : 0.0L) : std::pow((long double)p2[i], lam);
    t[i] = a * b;
    z += t[i];
  }
  for (auto& v : t) v /= z;
  return t;
}

inline long double kl_ld(const std::vector<long double>& p, const Vec& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0L) continue;
    s += p[i] * std::log(p[i] / static_cast<long double>(q[i]));
  }
  return s;
}

struct Tilted {
  long double to_p1;
  long double to_p2;
};

inline Tilted tilted(const Vec& p1, const Vec& p2, long double lam) {
  const auto t = tilt(p1, p2, lam);
  return {kl_ld(t, p1), kl_ld(t, p2)};
}

struct Scan {
  double lambda;
  double value;
};

/// Chernoff point by exhaustive scan of a uniform λ grid.
inline Scan chernoff_scan(const Vec& p1, const Vec& p2, double step = 1e-6) {
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / step));
  Scan best{0.0, 0.0};
  long double best_gap = INFINITY;
  for (std::int64_t i = 0; i <= steps; ++i) {
    const long double lam = static_cast<long double>(i) / steps;
    const Tilted d = tilted(p1, p2, lam);
    const long double gap = std::fabs(d.to_p1 - d.to_p2);
    if (gap < best_gap) {
      best_gap = gap;
      best = {static_cast<double>(lam), static_cast<double>((d.to_p1 + d.to_p2) / 2)};
    }
  }
  return best;
}

/// E1(γ) = max{D(P^λ||P1) : D(P^λ||P2) >= γ} and
/// E2(γ) = max{D(P^λ||P2) : D(P^λ||P1) >= γ}, maximized over a uniform grid.
struct Corner {
  double lambda_a, e1, lambda_b, e2;
};

inline Corner gamma_corner_scan(const Vec& p1, const Vec& p2, double gamma,
                                double step = 1e-5) {
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / step));
  Corner c{0, 0, 1, 0};
  long double best1 = -1, best2 = -1;
  for (std::int64_t i = 0; i <= steps; ++i) {
    const long double lam = static_cast<long double>(i) / steps;
    const Tilted d = tilted(p1, p2, lam);
    if (d.to_p2 >= gamma && d.to_p1 > best1) {
      best1 = d.to_p1;
      c.lambda_a = static_cast<double>(lam);
      c.e1 = static_cast<double>(d.to_p1);
    }
    if (d.to_p1 >= gamma && d.to_p2 > best2) {
      best2 = d.to_p2;
      c.lambda_b = static_cast<double>(lam);
      c.e2 = static_cast<double>(d.to_p2);
    }
  }
  return c;
}

/// O(N^2) Pareto filter: keeps points not strictly dominated by another.
inline std::vector<std::pair<double, double>> pareto_naive(
    const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool ge = pts[j].first >= pts[i].first && pts[j].second >= pts[i].second;
      const bool gt = pts[j].first > pts[i].first || pts[j].second > pts[i].second;
      dominated = ge && gt;
    }
    if (!dominated) out.push_back(pts[i]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Calls visit(sequence, P1(seq), P2(seq)) for every sequence in [m]^len.
inline void for_each_sequence(
    const Vec& p1, const Vec& p2, std::size_t len,
    const std::function<void(const std::vector<std::uint32_t>&, long double, long double)>&
        visit) {
  const std::size_t m = p1.size();
  std::vector<std::uint32_t> seq(len, 0);
  while (true) {
    long double a = 1.0L, b = 1.0L;
    for (auto x : seq) {
      a *= p1[x];
      b *= p2[x];
    }
    visit(seq, a, b);
    std::size_t pos = 0;
    while (pos < len && ++seq[pos] == m) seq[pos++] = 0;
    if (pos == len) break;
  }
}

// Hand-rolled generators for property tests.

inline Vec random_pmf(std::mt19937_64& rng, std::size_t m, double min_p = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec p(m);
  double s = 0.0;
  for (auto& v : p) {
    v = u(rng) + 1e-3;
    s += v;
  }
  for (auto& v : p) v = min_p + (1.0 - m * min_p) * v / s;
  return p;
}

/// Random pair, distinct, full support.
inline std::pair<Vec, Vec> random_pair(std::mt19937_64& rng, std::size_t m, double min_p) {
  while (true) {
    Vec a = random_pmf(rng, m, min_p);
    Vec b = random_pmf(rng, m, min_p);
    if (kl(a, b) > 0.05) return {a, b};
  }
}

}  // namespace oracle
