#pragma once

// Comparison rules shared by the executable tests and the exact oracle. Both
// sides must resolve boundary ties identically: ">= upper" accepts H1,
// "<= lower" accepts H2, and a single threshold sends exact ties to H1.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace afl {

enum class Decision : std::uint8_t { choose_h1 = 0, choose_h2 = 1, reject_both = 2 };

enum class Hypothesis : std::uint8_t { h1 = 0, h2 = 1 };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::choose_h1: return "choose_h1";
    case Decision::choose_h2: return "choose_h2";
    case Decision::reject_both: return "reject_both";
  }
  return "unknown";
}

inline std::string_view to_string(Hypothesis h) {
  return h == Hypothesis::h1 ? "h1" : "h2";
}

/// Deciding the other hypothesis is an error; rejecting both is not.
inline bool is_error(Hypothesis truth, Decision d) {
  return truth == Hypothesis::h1 ? d == Decision::choose_h2
                                 : d == Decision::choose_h1;
}

enum class BandSide : std::uint8_t { accept_h1 = 0, accept_h2 = 1, inside = 2 };

inline double normalized_statistic(double llr_sum, std::size_t length) {
  return llr_sum / static_cast<double>(length);
}

inline BandSide classify_band(double stat, double upper, double lower) {
  if (stat >= upper) return BandSide::accept_h1;
  if (stat <= lower) return BandSide::accept_h2;
  return BandSide::inside;
}

inline Decision threshold_decision(double stat, double threshold) {
  return stat >= threshold ? Decision::choose_h1 : Decision::choose_h2;
}

}  // namespace afl
