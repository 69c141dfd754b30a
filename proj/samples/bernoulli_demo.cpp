// Design a two-phase test for Bernoulli(0.9) vs Bernoulli(0.2), check it
// against exact enumeration and a short simulation.

#include <cstdio>

#include "afl/exact.hpp"
#include "afl/exponents.hpp"
#include "afl/mcsim.hpp"

int main() {
  const afl::HypothesisPair pair(afl::bernoulli(0.9), afl::bernoulli(0.2));

  const afl::ChernoffPoint cp = afl::chernoff(pair);
  const afl::KStar ks = afl::kstar(pair);
  std::printf("D(P1||P2) = %.6f  D(P2||P1) = %.6f\n", pair.kl12(), pair.kl21());
  std::printf("lambda* = %.6f  D* = %.6f  k* = %.4f (use k >= %zu)\n", cp.lambda_star,
              cp.d_star, ks.raw, ks.k_min);

  const double gamma = 0.2;
  const afl::TwoPhaseDesign d = afl::two_phase_design(pair, gamma, ks.k_min);
  std::printf("gamma = %.2f: alpha1 = %.6f  beta1 = %.6f  targets (%.6f, %.6f)\n", gamma,
              d.alpha1, d.beta1, d.e1_target, d.e2_target);

  const std::size_t n = 20;
  const afl::TwoPhaseTest test{n, d};
  const afl::ErrorReport exact = afl::exact_report(pair, test);
  std::printf("n = %zu exact: P1(err) = %.3e  P2(err) = %.3e  P1(phase II) = %.3e\n", n,
              exact.p1_err.value(), exact.p2_err.value(), exact.p1_continue.value());

  const afl::SimReport sim =
      afl::simulate(pair, afl::Hypothesis::h1, test, 200000, afl::SeedSpec{7});
  std::printf("n = %zu simulated (H1): err = %.3e [%.3e, %.3e]  E[tau]/n = %.4f\n", n,
              sim.err_estimate, sim.err_ci_low, sim.err_ci_high,
              sim.tau_mean / static_cast<double>(n));
  return 0;
}
