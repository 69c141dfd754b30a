#pragma once

// CSV and JSON encodings of regions, designs and reports.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "afl/exact.hpp"
#include "afl/exponents.hpp"
#include "afl/mcsim.hpp"

namespace afl {

inline constexpr int kSchemaVersion = 1;

enum class Units { nats, bits };

inline double unit_scale(Units u) { return u == Units::bits ? 1.0 / std::numbers::ln2 : 1.0; }
inline std::string_view unit_name(Units u) { return u == Units::bits ? "bits" : "nats"; }

/// Shortest round-trip decimal; NaN becomes an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// JSON-safe number: non-finite values become null.
inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

/// Writes region boundaries with the columns lambda,e1_<unit>,e2_<unit>,kind,
/// optionally preceded by label columns (one value per label per row).
class RegionCsvWriter {
 public:
  RegionCsvWriter(std::ostream& os, Units units, std::vector<std::string> labels = {})
      : os_(os), units_(units), labels_(std::move(labels)) {
    for (const auto& l : labels_) os_ << l << ',';
    os_ << "lambda,e1_" << unit_name(units_) << ",e2_" << unit_name(units_) << ",kind\n";
  }

  void write(const RegionBoundary& b, const std::vector<std::string>& label_values = {}) {
    if (label_values.size() != labels_.size()) {
      throw InvalidArgument("region csv: label count mismatch");
    }
    const double s = unit_scale(units_);
    for (std::size_t i = 0; i < b.points.size(); ++i) {
      for (const auto& v : label_values) os_ << v << ',';
      const double lambda = i < b.lambdas.size() ? b.lambdas[i] : std::nan("");
      os_ << format_number(lambda) << ',' << format_number(b.points[i].e1 * s) << ','
          << format_number(b.points[i].e2 * s) << ',' << to_string(b.kind) << '\n';
    }
  }

 private:
  std::ostream& os_;
  Units units_;
  std::vector<std::string> labels_;
};

inline void write_region_csv(std::ostream& os, const RegionBoundary& b, Units units) {
  RegionCsvWriter w(os, units);
  w.write(b);
}

inline nlohmann::json to_json(const TwoPhaseDesign& d, Units units) {
  const double s = unit_scale(units);
  return {{"gamma", d.gamma * s},
          {"k", d.k},
          {"lambda_a", d.lambda_a},
          {"lambda_b", d.lambda_b},
          {"alpha1", d.alpha1 * s},
          {"beta1", d.beta1 * s},
          {"phase2_lambda", d.phase2_lambda},
          {"alpha2", d.alpha2 * s},
          {"e1_target", d.e1_target * s},
          {"e2_target", d.e2_target * s},
          {"units", unit_name(units)}};
}

inline nlohmann::json to_json(const LogProb& p, std::size_t n, Units units) {
  return {{"probability", p.value()},
          {"log_probability", json_number(p.log)},
          {std::string("exponent_") + std::string(unit_name(units)),
           json_number(p.exponent(n) * unit_scale(units))}};
}

/// ErrorReport with the keys p1_err, p2_err, p1_continue, p2_continue,
/// p1_reject, p2_reject (plus p1_correct, p2_correct).
inline nlohmann::json to_json(const ErrorReport& r, Units units) {
  nlohmann::json j;
  j["n"] = r.n;
  j["p1_err"] = to_json(r.p1_err, r.n, units);
  j["p2_err"] = to_json(r.p2_err, r.n, units);
  j["p1_continue"] = to_json(r.p1_continue, r.n, units);
  j["p2_continue"] = to_json(r.p2_continue, r.n, units);
  j["p1_reject"] = to_json(r.p1_reject, r.n, units);
  j["p2_reject"] = to_json(r.p2_reject, r.n, units);
  j["p1_correct"] = to_json(r.p1_correct, r.n, units);
  j["p2_correct"] = to_json(r.p2_correct, r.n, units);
  return j;
}

inline nlohmann::json to_json(const ExponentFit& f, Units units) {
  const double s = unit_scale(units);
  return {{"slope", json_number(f.slope * s)},
          {"intercept", json_number(f.intercept)},
          {"r2", json_number(f.r2)},
          {"infinite", f.infinite},
          {"points", f.points},
          {"units", unit_name(units)}};
}

inline nlohmann::json to_json(const SimReport& r) {
  nlohmann::json moments = nlohmann::json::object();
  for (const auto& [l, v] : r.tau_scaled_moments) moments[std::to_string(l)] = v;
  nlohmann::json j = {
      {"n", r.n},
      {"truth", to_string(r.truth)},
      {"trials", r.trials},
      {"decisions",
       {{"choose_h1", r.count(Decision::choose_h1)},
        {"choose_h2", r.count(Decision::choose_h2)},
        {"reject_both", r.count(Decision::reject_both)}}},
      {"errors", r.errors},
      {"err_estimate", r.err_estimate},
      {"err_ci_low", r.err_ci_low},
      {"err_ci_high", r.err_ci_high},
      {"rule_of_three_upper", r.rule_of_three_upper ? nlohmann::json(*r.rule_of_three_upper)
                                                    : nlohmann::json(nullptr)},
      {"tau_mean", r.tau_mean},
      {"tau_var", r.tau_var},
      {"tau_scaled_moments", moments},
      {"truncated_count", r.truncated_count},
      {"continue_fraction", r.continue_fraction()}};
  return j;
}

/// One row per (n, hypothesis). Exact columns are left empty when unknown.
inline void write_sim_csv_header(std::ostream& os) {
  os << "n,hypothesis,trials,choose_h1,choose_h2,reject_both,errors,err_estimate,"
        "err_ci_low,err_ci_high,tau_mean,tau_var,continue_fraction,truncated,"
        "exact_err,exact_continue\n";
}

inline void write_sim_csv_row(std::ostream& os, const SimReport& r,
                              double exact_err = std::nan(""),
                              double exact_continue = std::nan("")) {
  os << r.n << ',' << to_string(r.truth) << ',' << r.trials << ','
     << r.count(Decision::choose_h1) << ',' << r.count(Decision::choose_h2) << ','
     << r.count(Decision::reject_both) << ',' << r.errors << ','
     << format_number(r.err_estimate) << ',' << format_number(r.err_ci_low) << ','
     << format_number(r.err_ci_high) << ',' << format_number(r.tau_mean) << ','
     << format_number(r.tau_var) << ',' << format_number(r.continue_fraction()) << ','
     << r.truncated_count << ',' << format_number(exact_err) << ','
     << format_number(exact_continue) << '\n';
}

}  // namespace afl
