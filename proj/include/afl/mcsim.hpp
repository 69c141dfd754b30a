#pragma once

// Reproducible Monte Carlo over the testbench procedures.
//
// Trials are split across workers, but every tally is an integer counter (a
// decision count or a stopping-time histogram bucket), so merging is
// order-invariant and reports are bit-identical for any worker count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "afl/decision.hpp"
#include "afl/error.hpp"
#include "afl/exact.hpp"
#include "afl/pmf.hpp"
#include "afl/rng.hpp"
#include "afl/testbench.hpp"

namespace afl {

inline constexpr double kWilsonZ95 = 1.959963984540054;

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                      double z = kWilsonZ95) {
  if (trials == 0) throw InvalidArgument("wilson: trials must be >= 1");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {successes == 0 ? 0.0 : std::max(0.0, center - half),
          successes == trials ? 1.0 : std::min(1.0, center + half)};
}

struct SimReport {
  std::size_t n = 0;
  Hypothesis truth = Hypothesis::h1;
  std::uint64_t trials = 0;
  std::array<std::uint64_t, 3> decisions{};  // indexed by Decision
  std::uint64_t errors = 0;
  double err_estimate = 0.0;
  double err_ci_low = 0.0;
  double err_ci_high = 1.0;
  std::optional<double> rule_of_three_upper;  // set when no error was seen
  double tau_mean = 0.0;
  double tau_var = 0.0;
  std::map<int, double> tau_scaled_moments;  // l -> E[(tau/n)^l]
  std::uint64_t truncated_count = 0;
  std::map<std::size_t, std::uint64_t> tau_counts;

  std::uint64_t count(Decision d) const { return decisions[static_cast<std::size_t>(d)]; }

  /// Trials that stopped after more than n samples.
  std::uint64_t continued() const {
    std::uint64_t c = 0;
    for (const auto& [tau, cnt] : tau_counts) {
      if (tau > n) c += cnt;
    }
    return c;
  }
  double continue_fraction() const {
    return static_cast<double>(continued()) / static_cast<double>(trials);
  }
};

namespace detail {

struct Tally {
  std::array<std::uint64_t, 3> decisions{};
  std::uint64_t truncated = 0;
  std::map<std::size_t, std::uint64_t> tau_counts;

  void merge(const Tally& o) {
    for (std::size_t i = 0; i < 3; ++i) decisions[i] += o.decisions[i];
    truncated += o.truncated;
    for (const auto& [tau, c] : o.tau_counts) tau_counts[tau] += c;
  }
};

template <class Test>
Tally run_trials(const HypothesisPair& pair, const Test& test,
                 const SymbolSampler& sampler, SeedSpec seed, Hypothesis truth,
                 std::uint64_t begin, std::uint64_t end) {
  Tally tally;
  std::size_t last_tau = 0;
  std::uint64_t* last_bucket = nullptr;
  for (std::uint64_t trial = begin; trial < end; ++trial) {
    RandomSource source(sampler, trial_stream(seed, truth, trial));
    const TestOutcome out = run_test(pair, test, source);
    ++tally.decisions[static_cast<std::size_t>(out.decision)];
    if (out.truncated) ++tally.truncated;
    if (last_bucket == nullptr || out.tau != last_tau) {
      last_bucket = &tally.tau_counts[out.tau];
      last_tau = out.tau;
    }
    ++*last_bucket;
  }
  return tally;
}

}  // namespace detail

/// Runs `trials` independent copies of `test` with samples drawn under
/// `truth`. `workers` = 0 uses the hardware concurrency.
inline SimReport simulate(const HypothesisPair& pair, Hypothesis truth,
                          const TestConfig& test, std::uint64_t trials,
                          SeedSpec seed, std::span<const int> moment_orders = {},
                          unsigned workers = 1) {
  if (trials == 0) throw InvalidArgument("simulate: trials must be >= 1");
  validate_test(pair, test);
  for (int l : moment_orders) {
    if (l < 1) throw InvalidArgument("simulate: moment orders must be >= 1");
  }
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, trials));

  const SymbolSampler sampler(truth == Hypothesis::h1 ? pair.p1() : pair.p2());
  std::vector<detail::Tally> tallies(workers);
  std::vector<std::exception_ptr> failures(workers);
  const auto work = [&](unsigned w) {
    const std::uint64_t begin = trials * w / workers;
    const std::uint64_t end = trials * (w + 1) / workers;
    try {
      tallies[w] = std::visit(
          [&](const auto& cfg) {
            return detail::run_trials(pair, cfg, sampler, seed, truth, begin, end);
          },
          test);
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  detail::Tally total;
  for (const auto& t : tallies) total.merge(t);

  SimReport r;
  r.n = base_length(test);
  r.truth = truth;
  r.trials = trials;
  r.decisions = total.decisions;
  r.truncated_count = total.truncated;
  r.tau_counts = std::move(total.tau_counts);
  r.errors = truth == Hypothesis::h1 ? r.count(Decision::choose_h2)
                                     : r.count(Decision::choose_h1);
  const double nt = static_cast<double>(trials);
  r.err_estimate = static_cast<double>(r.errors) / nt;
  const WilsonInterval ci = wilson_interval(r.errors, trials);
  r.err_ci_low = std::min(ci.low, r.err_estimate);
  r.err_ci_high = std::max(ci.high, r.err_estimate);
  if (r.errors == 0) r.rule_of_three_upper = std::min(1.0, 3.0 / nt);

  const double nn = static_cast<double>(r.n);
  double mean = 0.0;
  for (const auto& [tau, c] : r.tau_counts) mean += static_cast<double>(tau) * static_cast<double>(c);
  mean /= nt;
  double var = 0.0;
  for (const auto& [tau, c] : r.tau_counts) {
    const double d = static_cast<double>(tau) - mean;
    var += d * d * static_cast<double>(c);
  }
  r.tau_mean = mean;
  r.tau_var = var / nt;
  for (int l : moment_orders) {
    double m = 0.0;
    for (const auto& [tau, c] : r.tau_counts) {
      m += std::pow(static_cast<double>(tau) / nn, l) * static_cast<double>(c);
    }
    r.tau_scaled_moments[l] = m / nt;
  }
  return r;
}

/// Builds the test to run at sample size n.
using TestFamily = std::function<TestConfig(std::size_t n)>;

inline TestFamily fixed_family(double alpha) {
  return [alpha](std::size_t n) -> TestConfig { return FixedTest{n, alpha}; };
}
inline TestFamily two_phase_family(const TwoPhaseDesign& design) {
  return [design](std::size_t n) -> TestConfig { return TwoPhaseTest{n, design}; };
}
inline TestFamily rejection_family(double alpha, double beta) {
  return [alpha, beta](std::size_t n) -> TestConfig { return RejectionTest{n, alpha, beta}; };
}
/// SPRT whose truncation horizon is `horizon_factor` * n.
inline TestFamily sprt_family(double delta, std::size_t horizon_factor) {
  return [delta, horizon_factor](std::size_t n) -> TestConfig {
    return SprtConfig{n, delta, horizon_factor * n};
  };
}

struct SweepRow {
  std::size_t n = 0;
  SimReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  ExponentFit err_fit;
  std::vector<std::size_t> unresolved_n;  // error estimate was zero
  std::optional<ExponentFit> continue_fit;
};

/// Per-n seeds are derived from the master seed so that rows are independent.
inline SeedSpec seed_for_n(SeedSpec seed, std::size_t n) {
  return {mix64(seed.master_seed + 0x632be59bd9b4e019ULL * (n + 1))};
}

inline void require_sweep_grid(std::span<const std::size_t> n_values) {
  if (n_values.size() < 3) throw InvalidArgument("sweep: need at least three n values");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] == 0) throw InvalidArgument("sweep: n values must be >= 1");
    if (i > 0 && n_values[i] <= n_values[i - 1]) {
      throw InvalidArgument("sweep: n values must be strictly increasing");
    }
  }
}

inline SweepResult sweep(const HypothesisPair& pair, Hypothesis truth,
                         const TestFamily& family,
                         std::span<const std::size_t> n_values,
                         std::uint64_t trials, SeedSpec seed,
                         unsigned workers = 1) {
  require_sweep_grid(n_values);
  SweepResult out;
  std::vector<std::pair<double, double>> err_points;
  std::vector<std::pair<double, double>> cont_points;
  for (std::size_t n : n_values) {
    SimReport rep = simulate(pair, truth, family(n), trials, seed_for_n(seed, n),
                             {}, workers);
    if (rep.errors > 0) {
      err_points.emplace_back(static_cast<double>(n), rep.err_estimate);
    } else {
      out.unresolved_n.push_back(n);
    }
    if (rep.continued() > 0) {
      cont_points.emplace_back(static_cast<double>(n), rep.continue_fraction());
    }
    out.rows.push_back({n, std::move(rep)});
  }
  if (err_points.size() < 2) {
    throw NumericalFailure(
        "sweep: error exponent unresolvable, fewer than two n values produced "
        "any error at this trial budget");
  }
  out.err_fit = exponent_fit(err_points);
  if (cont_points.size() >= 2) out.continue_fit = exponent_fit(cont_points);
  return out;
}

struct MomentRow {
  std::size_t n = 0;
  int order = 1;
  double scaled_moment = 1.0;  // E[(tau/n)^l]
  double scaled_variance = 0.0;  // Var(tau)/n^2
};

struct MomentTable {
  std::vector<MomentRow> rows;
  std::vector<std::pair<std::size_t, double>> tau_variance;  // (n, Var(tau))
  std::vector<SimReport> reports;  // one per n, truth as requested
  /// Over n with n*gamma > 2 log(kn): Var(tau) and every E[(tau/n)^l] - 1
  /// are nonincreasing in n.
  bool variance_trend_ok = true;
  bool moment_trend_ok = true;
};

inline MomentTable moment_check(const HypothesisPair& pair, Hypothesis truth,
                                const TwoPhaseDesign& design,
                                std::span<const std::size_t> n_values,
                                std::uint64_t trials, SeedSpec seed,
                                std::span<const int> orders, unsigned workers = 1) {
  require_sweep_grid(n_values);
  if (orders.empty()) throw InvalidArgument("moment_check: need at least one order");
  MomentTable table;
  std::optional<double> prev_var;
  std::map<int, double> prev_excess;
  for (std::size_t n : n_values) {
    SimReport rep = simulate(pair, truth, TwoPhaseTest{n, design}, trials,
                             seed_for_n(seed, n), orders, workers);
    const double nn = static_cast<double>(n);
    for (int l : orders) {
      table.rows.push_back({n, l, rep.tau_scaled_moments.at(l), rep.tau_var / (nn * nn)});
    }
    table.tau_variance.emplace_back(n, rep.tau_var);

    const bool in_regime =
        nn * design.gamma > 2.0 * std::log(static_cast<double>(design.k) * nn);
    if (in_regime) {
      if (prev_var && rep.tau_var > *prev_var) table.variance_trend_ok = false;
      for (int l : orders) {
        const double excess = rep.tau_scaled_moments.at(l) - 1.0;
        auto it = prev_excess.find(l);
        if (it != prev_excess.end() && excess > it->second) table.moment_trend_ok = false;
        prev_excess[l] = excess;
      }
      prev_var = rep.tau_var;
    }
    table.reports.push_back(std::move(rep));
  }
  return table;
}

}  // namespace afl
