#pragma once

// Executable decision procedures. Each consumes a pull-based sample stream
// and returns the decision together with the number of samples it used.

#include <concepts>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "afl/decision.hpp"
#include "afl/error.hpp"
#include "afl/exponents.hpp"
#include "afl/pmf.hpp"

namespace afl {

template <class S>
concept SampleSource = requires(S& s) {
  { s.next() } -> std::convertible_to<Symbol>;
};

/// Replays an explicit sequence; throws once it runs dry.
class SequenceSource {
 public:
  explicit SequenceSource(std::span<const Symbol> samples) : samples_(samples) {}

  Symbol next() {
    if (pos_ >= samples_.size()) {
      throw InvalidArgument("sample stream exhausted");
    }
    return samples_[pos_++];
  }
  std::size_t consumed() const noexcept { return pos_; }

 private:
  std::span<const Symbol> samples_;
  std::size_t pos_ = 0;
};

/// Symbol counts of a window; the LLR is always evaluated from these.
class TypeCounter {
 public:
  explicit TypeCounter(std::size_t alphabet) : counts_(alphabet, 0) {}

  void add(Symbol x) {
    if (x >= counts_.size()) throw InvalidArgument("llr: symbol out of range");
    ++counts_[x];
    ++length_;
  }
  template <SampleSource S>
  void draw(S& stream, std::size_t how_many) {
    for (std::size_t i = 0; i < how_many; ++i) add(stream.next());
  }
  double llr(const HypothesisPair& pair) const { return type_llr(pair, counts_); }
  std::size_t length() const noexcept { return length_; }
  std::span<const Count> counts() const noexcept { return counts_; }

 private:
  std::vector<Count> counts_;
  std::size_t length_ = 0;
};

struct TestOutcome {
  Decision decision = Decision::choose_h1;
  std::size_t tau = 0;
  bool truncated = false;

  friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

/// Wald test with thresholds scaled by n and a truncation horizon.
struct SprtConfig {
  std::size_t n = 1;
  double delta = 0.1;
  std::size_t max_samples = 1000;
};

struct SprtThresholds {
  double upper = 0.0;  // (D(P2||P1) - δ) n
  double lower = 0.0;  // -(D(P1||P2) - δ) n
};

inline SprtThresholds sprt_thresholds(const HypothesisPair& pair,
                                      const SprtConfig& cfg) {
  require_finite_divergences(pair, "sprt");
  if (cfg.n == 0) throw InvalidArgument("sprt: n must be >= 1");
  if (cfg.max_samples == 0) throw InvalidArgument("sprt: max_samples must be >= 1");
  if (!(cfg.delta > 0.0)) throw InvalidArgument("sprt: delta must be > 0");
  if (!(cfg.delta < pair.kl12() && cfg.delta < pair.kl21())) {
    throw InvalidArgument("sprt: delta must be below both KL divergences");
  }
  const double n = static_cast<double>(cfg.n);
  return {(pair.kl21() - cfg.delta) * n, -(pair.kl12() - cfg.delta) * n};
}

/// Stop after n samples; H1 iff LLR/n >= alpha.
template <SampleSource S>
TestOutcome run_fixed(const HypothesisPair& pair, std::size_t n, double alpha,
                      S& stream) {
  if (n == 0) throw InvalidArgument("fixed test: n must be >= 1");
  TypeCounter window(pair.size());
  window.draw(stream, n);
  const double stat = normalized_statistic(window.llr(pair), n);
  return {threshold_decision(stat, alpha), n, false};
}

/// Accumulate the LLR until it leaves (lower, upper). At the horizon the sign
/// of the LLR decides (ties to H1) and the outcome is flagged truncated.
template <SampleSource S>
TestOutcome run_sprt(const HypothesisPair& pair, const SprtConfig& cfg,
                     S& stream) {
  const SprtThresholds th = sprt_thresholds(pair, cfg);
  TypeCounter path(pair.size());
  double llr = 0.0;
  for (std::size_t t = 1; t <= cfg.max_samples; ++t) {
    path.add(stream.next());
    llr = path.llr(pair);
    if (llr >= th.upper) return {Decision::choose_h1, t, false};
    if (llr <= th.lower) return {Decision::choose_h2, t, false};
  }
  return {threshold_decision(llr, 0.0), cfg.max_samples, true};
}

/// Phase I on n samples against (α1, β1); if the statistic lands strictly
/// inside, phase II decides on kn fresh samples against α2.
template <SampleSource S>
TestOutcome run_two_phase(const HypothesisPair& pair,
                          const TwoPhaseDesign& design, std::size_t n,
                          S& stream) {
  if (n == 0) throw InvalidArgument("two-phase test: n must be >= 1");
  if (design.k == 0) throw InvalidArgument("two-phase test: k must be >= 1");
  TypeCounter first(pair.size());
  first.draw(stream, n);
  const double stat1 = normalized_statistic(first.llr(pair), n);
  switch (classify_band(stat1, design.alpha1, design.beta1)) {
    case BandSide::accept_h1: return {Decision::choose_h1, n, false};
    case BandSide::accept_h2: return {Decision::choose_h2, n, false};
    case BandSide::inside: break;
  }
  const std::size_t extra = design.k * n;
  TypeCounter second(pair.size());
  second.draw(stream, extra);
  const double stat2 = normalized_statistic(second.llr(pair), extra);
  return {threshold_decision(stat2, design.alpha2), n + extra, false};
}

/// Fixed-length test with a rejection band strictly between beta and alpha.
template <SampleSource S>
TestOutcome run_rejection(const HypothesisPair& pair, std::size_t n,
                          double alpha, double beta, S& stream) {
  if (n == 0) throw InvalidArgument("rejection test: n must be >= 1");
  if (alpha < beta) throw InvalidArgument("rejection test: alpha < beta");
  TypeCounter window(pair.size());
  window.draw(stream, n);
  const double stat = normalized_statistic(window.llr(pair), n);
  switch (classify_band(stat, alpha, beta)) {
    case BandSide::accept_h1: return {Decision::choose_h1, n, false};
    case BandSide::accept_h2: return {Decision::choose_h2, n, false};
    case BandSide::inside: break;
  }
  return {Decision::reject_both, n, false};
}

// Complete test configurations, used by the simulator and the exact oracle.

struct FixedTest {
  std::size_t n = 1;
  double alpha = 0.0;
};

struct TwoPhaseTest {
  std::size_t n = 1;
  TwoPhaseDesign design;
};

struct RejectionTest {
  std::size_t n = 1;
  double alpha = 0.0;
  double beta = 0.0;
};

using TestConfig = std::variant<FixedTest, SprtConfig, TwoPhaseTest, RejectionTest>;

inline std::size_t base_length(const TestConfig& test) {
  return std::visit([](const auto& t) { return t.n; }, test);
}

inline std::string_view test_name(const TestConfig& test) {
  struct Namer {
    std::string_view operator()(const FixedTest&) const { return "fixed"; }
    std::string_view operator()(const SprtConfig&) const { return "sprt"; }
    std::string_view operator()(const TwoPhaseTest&) const { return "two_phase"; }
    std::string_view operator()(const RejectionTest&) const { return "rejection"; }
  };
  return std::visit(Namer{}, test);
}

/// Throws InvalidArgument if the configuration cannot run against `pair`.
inline void validate_test(const HypothesisPair& pair, const TestConfig& test) {
  if (base_length(test) == 0) throw InvalidArgument("test: n must be >= 1");
  if (const auto* s = std::get_if<SprtConfig>(&test)) {
    sprt_thresholds(pair, *s);
  } else if (const auto* tp = std::get_if<TwoPhaseTest>(&test)) {
    if (tp->design.k == 0) throw InvalidArgument("two-phase test: k must be >= 1");
  } else if (const auto* r = std::get_if<RejectionTest>(&test)) {
    if (r->alpha < r->beta) throw InvalidArgument("rejection test: alpha < beta");
  }
}

template <SampleSource S>
TestOutcome run_test(const HypothesisPair& pair, const FixedTest& t, S& s) {
  return run_fixed(pair, t.n, t.alpha, s);
}
template <SampleSource S>
TestOutcome run_test(const HypothesisPair& pair, const SprtConfig& t, S& s) {
  return run_sprt(pair, t, s);
}
template <SampleSource S>
TestOutcome run_test(const HypothesisPair& pair, const TwoPhaseTest& t, S& s) {
  return run_two_phase(pair, t.design, t.n, s);
}
template <SampleSource S>
TestOutcome run_test(const HypothesisPair& pair, const RejectionTest& t, S& s) {
  return run_rejection(pair, t.n, t.alpha, t.beta, s);
}
template <SampleSource S>
TestOutcome run_test(const HypothesisPair& pair, const TestConfig& t, S& s) {
  return std::visit([&](const auto& cfg) { return run_test(pair, cfg, s); }, t);
}

}  // namespace afl
