#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "afl/exact.hpp"
#include "afl/testbench.hpp"
#include "oracles.hpp"

using namespace afl;

namespace {

HypothesisPair ber_pair() { return HypothesisPair(bernoulli(0.9), bernoulli(0.2)); }

std::vector<double> vec(const Pmf& p) { return {p.probs().begin(), p.probs().end()}; }

/// Decision and continuation probabilities from running the testbench on
/// every sequence of length `len`.
struct Brute {
  std::array<std::array<long double, 3>, 2> decided{};  // [truth][decision]
  std::array<long double, 2> beyond_n{};
};

Brute brute_force(const HypothesisPair& pair, const TestConfig& test, std::size_t len) {
  Brute b;
  const std::size_t n = base_length(test);
  oracle::for_each_sequence(
      vec(pair.p1()), vec(pair.p2()), len,
      [&](const std::vector<std::uint32_t>& seq, long double a, long double c) {
        SequenceSource src(seq);
        const TestOutcome out = run_test(pair, test, src);
        const auto d = static_cast<std::size_t>(out.decision);
        b.decided[0][d] += a;
        b.decided[1][d] += c;
        if (out.tau > n) {
          b.beyond_n[0] += a;
          b.beyond_n[1] += c;
        }
      });
  return b;
}

void expect_close(double exact, long double brute, const char* what) {
  EXPECT_NEAR(exact, static_cast<double>(brute), 1e-13 + 1e-11 * static_cast<double>(brute))
      << what;
}

void expect_matches(const ErrorReport& r, const Brute& b) {
  const auto h1 = static_cast<std::size_t>(Decision::choose_h1);
  const auto h2 = static_cast<std::size_t>(Decision::choose_h2);
  const auto rj = static_cast<std::size_t>(Decision::reject_both);
  expect_close(r.p1_err.value(), b.decided[0][h2], "p1_err");
  expect_close(r.p2_err.value(), b.decided[1][h1], "p2_err");
  expect_close(r.p1_correct.value(), b.decided[0][h1], "p1_correct");
  expect_close(r.p2_correct.value(), b.decided[1][h2], "p2_correct");
  expect_close(r.p1_reject.value(), b.decided[0][rj], "p1_reject");
  expect_close(r.p2_reject.value(), b.decided[1][rj], "p2_reject");
  expect_close(r.p1_continue.value(), b.beyond_n[0], "p1_continue");
  expect_close(r.p2_continue.value(), b.beyond_n[1], "p2_continue");
}

/// Statistic LLR/len of a specific type, used to place thresholds on ties.
double type_stat(const HypothesisPair& pair, std::vector<Count> counts) {
  std::size_t len = 0;
  for (auto c : counts) len += c;
  return type_llr(pair, counts) / static_cast<double>(len);
}

}  // namespace

TEST(ExactFixed, MatchesBruteForceIncludingTies) {
  const HypothesisPair pair(Pmf({0.2, 0.3, 0.5}), Pmf({0.4, 0.4, 0.2}));
  const std::size_t n = 7;
  for (const std::vector<Count>& tie : {std::vector<Count>{2, 2, 3}, {0, 7, 0}, {3, 1, 3}}) {
    const double alpha = type_stat(pair, tie);
    const TestConfig t = FixedTest{n, alpha};
    expect_matches(exact_report(pair, t), brute_force(pair, t, n));
  }
}

TEST(ExactRejection, MatchesBruteForceIncludingTies) {
  const HypothesisPair pair(Pmf({0.2, 0.3, 0.5}), Pmf({0.4, 0.4, 0.2}));
  const std::size_t n = 6;
  const double hi = type_stat(pair, {1, 1, 4});
  const double lo = type_stat(pair, {3, 2, 1});
  ASSERT_GT(hi, lo);
  const TestConfig t = RejectionTest{n, hi, lo};
  expect_matches(exact_report(pair, t), brute_force(pair, t, n));
}

TEST(ExactTwoPhase, MatchesBruteForceIncludingTies) {
  const HypothesisPair pair = ber_pair();
  const std::size_t n = 4, k = 2;
  TwoPhaseDesign d = two_phase_design(pair, 0.2, k);
  // Types {1,3} and {3,1} sit exactly on the band edges, {2,2} strictly inside.
  d.alpha1 = type_stat(pair, {1, 3});
  d.beta1 = type_stat(pair, {3, 1});
  d.alpha2 = type_stat(pair, {4, 4});
  const TestConfig t = TwoPhaseTest{n, d};
  expect_matches(exact_report(pair, t), brute_force(pair, t, n * (k + 1)));
}

TEST(ExactTwoPhase, MatchesBruteForceTernary) {
  const HypothesisPair pair(Pmf({0.2, 0.3, 0.5}), Pmf({0.4, 0.4, 0.2}));
  const TwoPhaseDesign d = two_phase_design(pair, 0.5 * chernoff(pair).d_star, 2);
  const TestConfig t = TwoPhaseTest{3, d};
  expect_matches(exact_report(pair, t), brute_force(pair, t, 9));
}

TEST(ExactSprt, MatchesBruteForce) {
  const HypothesisPair pair = ber_pair();
  const SprtConfig cfg{3, 0.3, 12};
  const TestConfig t = cfg;
  expect_matches(exact_report(pair, t), brute_force(pair, t, cfg.max_samples));
}

TEST(ExactSprt, MatchesBruteForceTernaryWithTruncation) {
  const HypothesisPair pair(Pmf({0.5, 0.25, 0.25}), Pmf({0.25, 0.5, 0.25}));
  const SprtConfig cfg{4, 0.05, 7};
  const TestConfig t = cfg;
  expect_matches(exact_report(pair, t), brute_force(pair, t, cfg.max_samples));
}

TEST(ExactSprt, WaldBounds) {
  const HypothesisPair pair = ber_pair();
  const SprtConfig cfg{10, 0.1, 100};
  const ErrorReport r = exact_sprt_truncated(pair, cfg);
  const double n = 10.0;
  EXPECT_LE(r.p1_err.value(), std::exp(-(pair.kl12() - cfg.delta - 0.1) * n));
  EXPECT_LE(r.p2_err.value(), std::exp(-(pair.kl21() - cfg.delta - 0.1) * n));
  const double total1 = r.p1_err.value() + r.p1_correct.value();
  EXPECT_NEAR(total1, 1.0, 1e-12);
}

TEST(BandProbabilities, NormalizeUnderBothHypotheses) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const auto [a, b] = oracle::random_pair(rng, 2 + rep % 4, 0.0);
    const HypothesisPair pair{Pmf(a), Pmf(b)};
    const BandProbabilities bp = band_probabilities(pair, 15, 0.1, -0.1);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      s1 += std::exp(bp.h1[i]);
      s2 += std::exp(bp.h2[i]);
    }
    EXPECT_NEAR(s1, 1.0, 1e-12);
    EXPECT_NEAR(s2, 1.0, 1e-12);
  }
}

TEST(ExactTwoPhase, ContinuationBelowPolyTimesExpMinusGammaN) {
  const HypothesisPair pair = ber_pair();
  const double gamma = 0.2;
  const std::size_t n = 20;
  const ErrorReport r = exact_two_phase(pair, two_phase_design(pair, gamma, 4), n);
  const double bound = std::exp(-gamma * static_cast<double>(n));
  // Method-of-types slack: (n+1)^(m) for a binary alphabet.
  EXPECT_LE(r.p1_continue.value(), bound * std::pow(n + 1.0, 2));
  EXPECT_LE(r.p2_continue.value(), bound * std::pow(n + 1.0, 2));
  EXPECT_NEAR(r.p1_continue.value(), 0.0023853805, 1e-9);
}

TEST(ExactTwoPhase, NoPhaseTwoWhenBandEmpty) {
  const HypothesisPair pair = ber_pair();
  const ChernoffPoint cp = chernoff(pair);
  const ErrorReport r = exact_two_phase(pair, two_phase_design(pair, cp.d_star, 2), 15);
  EXPECT_EQ(r.p1_continue.log, -kInf);
  EXPECT_EQ(r.p2_continue.log, -kInf);
}

TEST(Guard, EnumerationLimit) {
  const HypothesisPair pair(Pmf({0.25, 0.25, 0.25, 0.25}), Pmf({0.1, 0.2, 0.3, 0.4}));
  EXPECT_THROW(exact_fixed(pair, 600, 0.0), GuardExceeded);
  try {
    exact_fixed(pair, 600, 0.0);
  } catch (const GuardExceeded& e) {
    EXPECT_EQ(e.limit(), kExactGuard);
    EXPECT_GT(e.required(), kExactGuard);
  }
  EXPECT_NO_THROW(exact_fixed(pair, 200, 0.0));  // C(203,3) ≈ 1.4e6
}

TEST(Degenerate, FixedTestAtZeroAlwaysChoosesH1) {
  const HypothesisPair pair(bernoulli(0.5), bernoulli(0.5));
  const ErrorReport r = exact_fixed(pair, 10, 0.0);
  EXPECT_EQ(r.p1_err.log, -kInf);
  EXPECT_NEAR(r.p2_err.value(), 1.0, 1e-15);
}

TEST(ExponentFit, RecoversSlopeAndFlagsZeros) {
  std::vector<std::pair<double, double>> pts;
  for (double n : {10.0, 20.0, 30.0}) pts.emplace_back(n, std::exp(-0.4 * n - 1.0));
  const ExponentFit f = exponent_fit(pts);
  EXPECT_NEAR(f.slope, 0.4, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  pts[1].second = 0.0;
  EXPECT_TRUE(exponent_fit(pts).infinite);
  EXPECT_THROW(exponent_fit(std::vector<std::pair<double, double>>{{1.0, 0.5}}),
               InvalidArgument);
}

TEST(TauMoments, ClosedForm) {
  const std::vector<int> orders = {1, 2, 3};
  const TauMoments t = two_phase_tau_moments(0.1, 10, 2, orders);
  EXPECT_NEAR(t.scaled.at(1), 0.9 + 0.1 * 3, 1e-15);
  EXPECT_NEAR(t.scaled.at(2), 0.9 + 0.1 * 9, 1e-15);
  EXPECT_NEAR(t.scaled.at(3), 0.9 + 0.1 * 27, 1e-15);
  EXPECT_NEAR(t.mean, 12.0, 1e-12);
  EXPECT_NEAR(t.variance, 4.0 * 100 * 0.09, 1e-12);
}

TEST(Properties, ExactAgreesWithBruteForceOnRandomConfigs) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kind(0, 3);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t m = 2 + rep % 2;
    const auto [a, b] = oracle::random_pair(rng, m, 0.05);
    const HypothesisPair pair{Pmf(a), Pmf(b)};
    const double d = chernoff(pair).d_star;
    const std::size_t n = 2 + rep % 3;
    TestConfig t;
    std::size_t len = n;
    switch (kind(rng)) {
      case 0: t = FixedTest{n, 0.0}; break;
      case 1: t = RejectionTest{n, 0.2 * d, -0.2 * d}; break;
      case 2: {
        const std::size_t k = 1 + rep % 2;
        t = TwoPhaseTest{n, two_phase_design(pair, 0.5 * d, k)};
        len = n * (k + 1);
        break;
      }
      default: {
        const double delta = 0.5 * std::min(pair.kl12(), pair.kl21());
        t = SprtConfig{n, delta, 3 * n};
        len = 3 * n;
        break;
      }
    }
    SCOPED_TRACE(std::string(test_name(t)) + " rep " + std::to_string(rep));
    expect_matches(exact_report(pair, t), brute_force(pair, t, len));
  }
}
