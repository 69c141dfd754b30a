#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "afl/exact.hpp"
#include "afl/mcsim.hpp"
#include "oracles.hpp"

using namespace afl;

namespace {

HypothesisPair ber_pair() { return HypothesisPair(bernoulli(0.9), bernoulli(0.2)); }

bool same(const SimReport& a, const SimReport& b) {
  return a.decisions == b.decisions && a.errors == b.errors && a.tau_counts == b.tau_counts &&
         a.truncated_count == b.truncated_count && a.tau_mean == b.tau_mean &&
         a.tau_var == b.tau_var && a.tau_scaled_moments == b.tau_scaled_moments;
}

}  // namespace

TEST(Rng, SplitMixReferenceValues) {
  // First outputs of SplitMix64 seeded with 0 (published reference sequence).
  SplitMix64 g(0);
  EXPECT_EQ(g(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(g(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(g(), 0x06c45d188009454fULL);
}

TEST(Rng, UniformInUnitInterval) {
  SplitMix64 g(123);
  for (int i = 0; i < 10000; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, TrialStreamsDifferByHypothesisAndIndex) {
  auto a = trial_stream({42}, Hypothesis::h1, 0);
  auto b = trial_stream({42}, Hypothesis::h2, 0);
  auto c = trial_stream({42}, Hypothesis::h1, 1);
  auto a2 = trial_stream({42}, Hypothesis::h1, 0);
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_EQ(x, a2());
}

TEST(Sampler, FrequenciesMatchPmf) {
  const Pmf p({0.1, 0.0, 0.6, 0.3});
  const SymbolSampler s(p);
  SplitMix64 g(9);
  std::vector<int> hist(4, 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++hist[s(g)];
  EXPECT_EQ(hist[1], 0);
  for (int x : {0, 2, 3}) {
    const double se = std::sqrt(p[x] * (1 - p[x]) / draws);
    EXPECT_NEAR(hist[x] / double(draws), p[x], 5 * se);
  }
}

TEST(Wilson, KnownValues) {
  const WilsonInterval w = wilson_interval(0, 100);
  EXPECT_EQ(w.low, 0.0);
  EXPECT_NEAR(w.high, 0.0369935, 1e-6);
  const WilsonInterval v = wilson_interval(50, 100);
  EXPECT_NEAR(v.low, 0.403832, 1e-6);
  EXPECT_NEAR(v.high, 0.596168, 1e-6);
  EXPECT_THROW(wilson_interval(0, 0), InvalidArgument);
}

TEST(Simulate, DeterministicAcrossWorkerCounts) {
  const HypothesisPair pair = ber_pair();
  const TestConfig t = TwoPhaseTest{10, two_phase_design(pair, 0.2, 2)};
  const std::vector<int> orders = {1, 2, 3};
  const SimReport r1 = simulate(pair, Hypothesis::h2, t, 20000, {5}, orders, 1);
  for (unsigned w : {2u, 3u, 4u, 8u}) {
    EXPECT_TRUE(same(r1, simulate(pair, Hypothesis::h2, t, 20000, {5}, orders, w))) << w;
  }
  EXPECT_FALSE(same(r1, simulate(pair, Hypothesis::h2, t, 20000, {6}, orders, 1)));
}

TEST(Simulate, DegenerateFixedAtZeroNeverErrsUnderH1) {
  const HypothesisPair pair(bernoulli(0.5), bernoulli(0.5));
  const SimReport r = simulate(pair, Hypothesis::h1, FixedTest{10, 0.0}, 1000, {1});
  EXPECT_EQ(r.errors, 0u);
  ASSERT_TRUE(r.rule_of_three_upper.has_value());
  EXPECT_NEAR(*r.rule_of_three_upper, 0.003, 1e-15);
  EXPECT_EQ(r.err_ci_low, 0.0);
}

TEST(Simulate, ValidatesInputs) {
  const HypothesisPair pair = ber_pair();
  EXPECT_THROW(simulate(pair, Hypothesis::h1, FixedTest{10, 0.0}, 0, {1}), InvalidArgument);
  EXPECT_THROW(simulate(pair, Hypothesis::h1, SprtConfig{10, 5.0, 100}, 10, {1}),
               InvalidArgument);
  const std::vector<int> bad = {0};
  EXPECT_THROW(simulate(pair, Hypothesis::h1, FixedTest{10, 0.0}, 10, {1}, bad),
               InvalidArgument);
}

TEST(Simulate, StoppingTimeStatisticsMatchExactTwoPhase) {
  const HypothesisPair pair = ber_pair();
  const std::size_t n = 8, k = 2;
  const TwoPhaseDesign d = two_phase_design(pair, 0.2, k);
  const std::vector<int> orders = {1, 2};
  const std::uint64_t trials = 200000;
  const SimReport r = simulate(pair, Hypothesis::h1, TwoPhaseTest{n, d}, trials, {3}, orders);
  const double q = exact_two_phase(pair, d, n).p1_continue.value();
  const TauMoments t = two_phase_tau_moments(q, n, k, orders);
  const double se_q = std::sqrt(q * (1 - q) / trials);
  EXPECT_NEAR(r.continue_fraction(), q, 4 * se_q);
  EXPECT_NEAR(r.tau_mean, t.mean, 4 * k * n * se_q);
  for (const auto& [tau, c] : r.tau_counts) {
    EXPECT_TRUE(tau == n || tau == (k + 1) * n) << tau;
  }
}

TEST(Simulate, AgreesWithExactForEveryTestKind) {
  std::mt19937_64 rng(8);
  const std::uint64_t trials = 100000;
  for (int rep = 0; rep < 8; ++rep) {
    const auto [a, b] = oracle::random_pair(rng, 2 + rep % 3, 0.05);
    const HypothesisPair pair{Pmf(a), Pmf(b)};
    const double dstar = chernoff(pair).d_star;
    const std::size_t n = 4 + rep;
    TestConfig t;
    switch (rep % 4) {
      case 0: t = FixedTest{n, 0.0}; break;
      case 1: t = RejectionTest{n, 0.3 * dstar, -0.3 * dstar}; break;
      case 2: t = TwoPhaseTest{n, two_phase_design(pair, 0.5 * dstar, 2)}; break;
      default:
        t = SprtConfig{n, 0.5 * std::min(pair.kl12(), pair.kl21()), 4 * n};
        break;
    }
    const ErrorReport ex = exact_report(pair, t);
    for (Hypothesis h : {Hypothesis::h1, Hypothesis::h2}) {
      const SimReport r = simulate(pair, h, t, trials, {100u + rep});
      const double p = error_probability(ex, h).value();
      const double se = std::sqrt(p * (1 - p) / trials);
      EXPECT_LE(std::abs(r.err_estimate - p), 4.5 * se + 1e-12)
          << test_name(t) << " rep " << rep << " truth " << to_string(h);
    }
  }
}

TEST(Sweep, FitsAndUnresolvedPoints) {
  const HypothesisPair pair = ber_pair();
  const std::vector<std::size_t> ns = {4, 8, 12};
  const SweepResult s = sweep(pair, Hypothesis::h1, fixed_family(0.0), ns, 50000, {1});
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_GT(s.err_fit.slope, 0.0);
  const std::vector<std::size_t> bad = {4, 8};
  EXPECT_THROW(sweep(pair, Hypothesis::h1, fixed_family(0.0), bad, 10, {1}), InvalidArgument);
  const std::vector<std::size_t> unsorted = {8, 4, 12};
  EXPECT_THROW(sweep(pair, Hypothesis::h1, fixed_family(0.0), unsorted, 10, {1}),
               InvalidArgument);
  const std::vector<std::size_t> big = {200, 300, 400};
  EXPECT_THROW(sweep(pair, Hypothesis::h1, fixed_family(0.0), big, 100, {1}),
               NumericalFailure);
}

TEST(MomentCheck, TrendsOnDesignGrid) {
  const HypothesisPair pair = ber_pair();
  const TwoPhaseDesign d = two_phase_design(pair, 0.2, 2);
  const std::vector<std::size_t> ns = {20, 40, 80};
  const std::vector<int> orders = {1, 2, 3};
  const MomentTable t = moment_check(pair, Hypothesis::h1, d, ns, 100000, {4}, orders);
  EXPECT_EQ(t.rows.size(), 9u);
  EXPECT_TRUE(t.variance_trend_ok);
  EXPECT_TRUE(t.moment_trend_ok);
}
