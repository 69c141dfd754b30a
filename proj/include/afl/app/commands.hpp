#pragma once

// CLI subcommands. Each command computes every output in memory first and
// touches the filesystem only once everything has succeeded.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afl/app/config.hpp"
#include "afl/exact.hpp"
#include "afl/exponents.hpp"
#include "afl/io.hpp"
#include "afl/mcsim.hpp"

namespace afl::app {

/// γ closer than this to D* is treated as D* by `design`.
inline constexpr double kDesignSnap = 1e-6;

inline constexpr const char* kDefaultOut = "afl_out";

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitGuard = 3,
  kExitNumerical = 4,
};

/// Named file contents, written together at the end of a command.
class OutputBundle {
 public:
  void add(std::string name, std::string content) {
    files_.emplace_back(std::move(name), std::move(content));
  }
  void add_json(std::string name, const nlohmann::json& j) {
    add(std::move(name), j.dump(2) + "\n");
  }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [name, content] : files_) {
      const auto path = dir / name;
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      os << content;
      if (!os) throw Error("cannot write " + path.string());
      written.push_back(path);
    }
    return written;
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct CommandIo {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

namespace detail {

inline std::filesystem::path out_dir(const ExperimentConfig& c) {
  const std::string d = c.out.value_or(kDefaultOut);
  if (d.empty()) throw ConfigError("out", "must not be empty");
  return d;
}

inline void require_finite_pair(const HypothesisPair& pair) {
  if (!pair.finite_divergences()) {
    throw ConfigError("p2", "supports differ, a KL divergence is infinite; exponent regions "
                            "need mutually absolutely continuous p1 and p2");
  }
}

inline std::string region_csv(const RegionBoundary& b, Units units) {
  std::ostringstream os;
  write_region_csv(os, b, units);
  return os.str();
}

inline RegionBoundary corner_region(ExponentPair p) {
  RegionBoundary b;
  b.kind = BoundaryKind::box_corner;
  b.add(p, std::nan(""));
  return b;
}

inline nlohmann::json pair_json(const HypothesisPair& pair, Units units) {
  const double s = unit_scale(units);
  return {{"p1", pair.p1().probs()},
          {"p2", pair.p2().probs()},
          {"kl12", json_number(pair.kl12() * s)},
          {"kl21", json_number(pair.kl21() * s)}};
}

inline nlohmann::json base_json(const char* command, Units units) {
  return {{"schema_version", kSchemaVersion}, {"command", command},
          {"units", unit_name(units)}};
}

inline void report_written(const CommandIo& io, const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) io.out << "wrote " << p.string() << '\n';
}

/// z-score of an estimate against an exact probability; null if undefined.
inline nlohmann::json z_score(double estimate, double exact, std::uint64_t trials) {
  const double var = exact * (1.0 - exact) / static_cast<double>(trials);
  if (var > 0.0) return (estimate - exact) / std::sqrt(var);
  return estimate == exact ? nlohmann::json(0.0) : nlohmann::json(nullptr);
}

/// Exact report when the enumeration guard allows it.
inline std::optional<ErrorReport> try_exact(const HypothesisPair& pair, const TestConfig& t,
                                            std::string* reason) {
  try {
    return exact_report(pair, t);
  } catch (const GuardExceeded& e) {
    if (reason) *reason = e.what();
    return std::nullopt;
  }
}

inline nlohmann::json fit_json(std::span<const std::pair<double, double>> log_points,
                               Units units) {
  if (log_points.size() < 2) return {{"status", "unresolved"}, {"points", log_points.size()}};
  nlohmann::json j = to_json(exponent_fit_log(log_points), units);
  j["status"] = "ok";
  return j;
}

}  // namespace detail

/// Regions: fixed-length curve, sequential corner, R_γ per γ and the
/// two-phase region per (γ, k), plus a JSON summary.
inline int cmd_region(const ExperimentConfig& c, const CommandIo& io = {}) {
  const HypothesisPair pair = pair_of(c, false);
  detail::require_finite_pair(pair);
  const Units units = units_of(c);
  const double s = unit_scale(units);
  const std::size_t grid = grid_of(c);
  const double tol = tol_of(c);
  const std::vector<double> gammas = gammas_of(c);
  std::optional<std::size_t> k;
  if (c.k) k = k_of(c);
  const auto dir = detail::out_dir(c);

  const ChernoffPoint cp = chernoff(pair, tol);
  const KStar ks = kstar(pair, tol);
  const ExponentPair corner = seq_corner(pair);

  OutputBundle files;
  files.add("fd_boundary.csv", detail::region_csv(fd_boundary(pair, grid), units));
  files.add("seq_corner.csv", detail::region_csv(detail::corner_region(corner), units));

  nlohmann::json summary = detail::base_json("region", units);
  summary["pair"] = detail::pair_json(pair, units);
  summary["lambda_star"] = cp.lambda_star;
  summary["d_star"] = cp.d_star * s;
  summary["k_star"] = ks.raw;
  summary["k_min"] = ks.k_min;
  summary["seq_corner"] = {{"e1", corner.e1 * s}, {"e2", corner.e2 * s}};
  summary["lambda_grid"] = grid;
  summary["gammas"] = nlohmann::json::array();

  std::vector<std::pair<double, RegionBoundary>> regions;
  for (double g : gammas) {
    const GammaCorner gc = e_gamma(pair, g, tol);
    if (gc.e1_clamped || gc.e2_clamped) {
      io.err << "warning: gamma=" << format_number(g)
             << " exceeds a KL divergence; corner exponent clamped to 0\n";
    }
    RegionBoundary r = gamma_region(pair, g, grid, tol);
    const std::string name = "gamma_region_" + format_number(g) + ".csv";
    files.add(name, detail::region_csv(r, units));
    nlohmann::json entry = {{"gamma", g * s},
                            {"e1", gc.e1 * s},
                            {"e2", gc.e2 * s},
                            {"lambda_a", gc.lambda_a},
                            {"lambda_b", gc.lambda_b},
                            {"clamped", gc.e1_clamped || gc.e2_clamped},
                            {"file", name}};
    if (k) {
      if (g <= cp.d_star + tol) {
        const std::string tp = "two_phase_region_" + format_number(g) + "_k" +
                               std::to_string(*k) + ".csv";
        files.add(tp, detail::region_csv(two_phase_region(pair, g, *k, grid, tol), units));
        entry["two_phase_file"] = tp;
        entry["k"] = *k;
      } else {
        io.err << "warning: gamma=" << format_number(g)
               << " exceeds D*; no two-phase region written for it\n";
      }
    }
    summary["gammas"].push_back(entry);
    regions.emplace_back(g, std::move(r));
  }
  if (regions.size() >= 2) {
    std::sort(regions.begin(), regions.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    bool nested = true;
    for (std::size_t i = 1; i < regions.size(); ++i) {
      nested = nested && contains(regions[i - 1].second, regions[i].second, 1e-12);
    }
    summary["nested_as_gamma_decreases"] = nested;
  }
  files.add_json("summary.json", summary);
  detail::report_written(io, files.write(dir));
  return kExitOk;
}

/// Prints the two-phase design for one (γ, k) as JSON.
inline int cmd_design(const ExperimentConfig& c, const CommandIo& io = {}) {
  const HypothesisPair pair = pair_of(c, false);
  detail::require_finite_pair(pair);
  const Units units = units_of(c);
  const double tol = tol_of(c);
  double gamma = single_gamma(c);
  const std::size_t k = k_of(c);
  if (c.phase2_lambda && !(*c.phase2_lambda >= 0.0 && *c.phase2_lambda <= 1.0)) {
    throw ConfigError("phase2_lambda", "must lie in [0, 1]");
  }
  const ChernoffPoint cp = chernoff(pair, tol);
  const double d_star = cp.d_star;
  nlohmann::json warnings = nlohmann::json::array();
  if (std::abs(gamma - d_star) <= kDesignSnap) {
    gamma = d_star;
    warnings.push_back(
        "gamma equals D*: alpha1 = beta1, phase II is never entered and the test reduces "
        "to a fixed-length test at the Chernoff threshold");
  } else if (gamma > d_star) {
    throw ConfigError("gamma", "gamma=" + format_number(gamma) + " exceeds D*=" +
                                   format_number(d_star) +
                                   "; no two-phase design exists, use a fixed-length design "
                                   "(test=fixed, alpha=0) instead");
  }
  const TwoPhaseDesign d = two_phase_design(pair, gamma, k, c.phase2_lambda, tol);
  nlohmann::json j = detail::base_json("design", units);
  j["design"] = to_json(d, units);
  j["lambda_star"] = cp.lambda_star;
  j["d_star"] = d_star * unit_scale(units);
  j["warnings"] = warnings;
  for (const auto& w : warnings) io.err << "warning: " << w.get<std::string>() << '\n';
  io.out << j.dump(2) << '\n';
  if (c.out) {
    OutputBundle files;
    files.add_json("design.json", j);
    files.write(detail::out_dir(c));
  }
  return kExitOk;
}

/// Exact error, continuation and rejection probabilities per block length.
inline int cmd_exact(const ExperimentConfig& c, const CommandIo& io = {}) {
  const HypothesisPair pair = pair_of(c, true);
  const Units units = units_of(c);
  const auto lengths = lengths_of(c);
  const auto dir = detail::out_dir(c);
  std::vector<TestConfig> tests;
  for (auto n : lengths) tests.push_back(test_of(c, pair, n));

  nlohmann::json j = detail::base_json("exact", units);
  j["pair"] = detail::pair_json(pair, units);
  j["test"] = test_json(tests.front(), units);
  j["reports"] = nlohmann::json::array();
  std::array<std::vector<std::pair<double, double>>, 4> pts;
  for (const auto& t : tests) {
    const ErrorReport r = exact_report(pair, t);
    nlohmann::json row = to_json(r, units);
    if (const auto* tp = std::get_if<TwoPhaseTest>(&t)) {
      row["exp_minus_gamma_n"] = std::exp(-tp->design.gamma * static_cast<double>(r.n));
    }
    j["reports"].push_back(row);
    const double nn = static_cast<double>(r.n);
    pts[0].emplace_back(nn, r.p1_err.log);
    pts[1].emplace_back(nn, r.p2_err.log);
    pts[2].emplace_back(nn, r.p1_continue.log);
    pts[3].emplace_back(nn, r.p2_continue.log);
  }
  if (lengths.size() >= 2) {
    const char* names[] = {"p1_err", "p2_err", "p1_continue", "p2_continue"};
    for (int i = 0; i < 4; ++i) {
      try {
        j["fits"][names[i]] = detail::fit_json(pts[i], units);
      } catch (const InvalidArgument& e) {
        j["fits"][names[i]] = {{"status", "unresolved"}, {"reason", e.what()}};
      }
    }
  }
  OutputBundle files;
  files.add_json("exact.json", j);
  detail::report_written(io, files.write(dir));
  return kExitOk;
}

namespace detail {

struct SimRow {
  SimReport report;
  std::optional<ErrorReport> exact;
};

inline nlohmann::json sim_row_json(const SimRow& row) {
  nlohmann::json j = to_json(row.report);
  if (row.exact) {
    const double pe = error_probability(*row.exact, row.report.truth).value();
    const double pc = continue_probability(*row.exact, row.report.truth).value();
    j["comparison"] = {{"estimate", row.report.err_estimate},
                       {"exact", pe},
                       {"z_score", z_score(row.report.err_estimate, pe, row.report.trials)},
                       {"continue_estimate", row.report.continue_fraction()},
                       {"continue_exact", pc},
                       {"continue_z_score",
                        z_score(row.report.continue_fraction(), pc, row.report.trials)}};
  } else {
    j["comparison"] = nullptr;
  }
  return j;
}

inline void sim_csv_row(std::ostream& os, const SimRow& row) {
  if (row.exact) {
    write_sim_csv_row(os, row.report,
                      error_probability(*row.exact, row.report.truth).value(),
                      continue_probability(*row.exact, row.report.truth).value());
  } else {
    write_sim_csv_row(os, row.report);
  }
}

}  // namespace detail

/// Monte Carlo runs per (n, hypothesis) with an exact comparison row.
inline int cmd_simulate(const ExperimentConfig& c, const CommandIo& io = {}) {
  const HypothesisPair pair = pair_of(c, true);
  const Units units = units_of(c);
  const auto lengths = lengths_of(c);
  const auto truths = truths_of(c);
  const std::uint64_t trials = trials_of(c);
  const SeedSpec seed{c.seed.value_or(1)};
  const unsigned workers = workers_of(c);
  const auto orders = moment_orders_of(c);
  const auto dir = detail::out_dir(c);
  std::vector<TestConfig> tests;
  for (auto n : lengths) tests.push_back(test_of(c, pair, n));

  std::vector<detail::SimRow> rows;
  for (const auto& t : tests) {
    std::string why;
    const auto exact = detail::try_exact(pair, t, &why);
    if (!exact) io.err << "note: no exact comparison, " << why << '\n';
    const SeedSpec s = lengths.size() > 1 ? seed_for_n(seed, base_length(t)) : seed;
    for (Hypothesis h : truths) {
      rows.push_back({simulate(pair, h, t, trials, s, orders, workers), exact});
    }
  }

  nlohmann::json j = detail::base_json("simulate", units);
  j["pair"] = detail::pair_json(pair, units);
  j["test"] = test_json(tests.front(), units);
  j["seed"] = seed.master_seed;
  j["trials"] = trials;
  j["reports"] = nlohmann::json::array();
  std::ostringstream csv;
  write_sim_csv_header(csv);
  for (const auto& row : rows) {
    j["reports"].push_back(detail::sim_row_json(row));
    detail::sim_csv_row(csv, row);
  }
  OutputBundle files;
  files.add_json("simulate.json", j);
  files.add("simulate.csv", csv.str());
  detail::report_written(io, files.write(dir));
  return kExitOk;
}

/// Monte Carlo over a grid of n with fitted exponents. The exact fit is
/// reported alongside when the enumeration guard allows it; the command
/// fails only if neither fit can be formed for some hypothesis.
inline int cmd_sweep(const ExperimentConfig& c, const CommandIo& io = {}) {
  const HypothesisPair pair = pair_of(c, true);
  const Units units = units_of(c);
  if (!c.n_values) throw ConfigError("n_values", "required for sweep");
  const auto lengths = lengths_of(c);
  try {
    require_sweep_grid(lengths);
  } catch (const InvalidArgument& e) {
    throw ConfigError("n_values", e.what());
  }
  const auto truths = truths_of(c);
  const std::uint64_t trials = trials_of(c);
  const SeedSpec seed{c.seed.value_or(1)};
  const unsigned workers = workers_of(c);
  const auto dir = detail::out_dir(c);
  std::vector<TestConfig> tests;
  for (auto n : lengths) tests.push_back(test_of(c, pair, n));

  std::vector<detail::SimRow> rows;
  bool exact_ok = true;
  for (const auto& t : tests) {
    std::string why;
    auto exact = exact_ok ? detail::try_exact(pair, t, &why) : std::nullopt;
    if (exact_ok && !exact) {
      io.err << "note: exact fit unavailable, " << why << '\n';
      exact_ok = false;
    }
    for (Hypothesis h : truths) {
      rows.push_back({simulate(pair, h, t, trials, seed_for_n(seed, base_length(t)), {},
                               workers),
                      exact});
    }
  }

  nlohmann::json j = detail::base_json("sweep", units);
  j["pair"] = detail::pair_json(pair, units);
  j["test"] = test_json(tests.front(), units);
  j["seed"] = seed.master_seed;
  j["trials"] = trials;
  j["n_values"] = lengths;
  bool any_missing = false;
  for (Hypothesis h : truths) {
    std::vector<std::pair<double, double>> mc_err, mc_cont, ex_err, ex_cont;
    nlohmann::json unresolved = nlohmann::json::array();
    for (const auto& row : rows) {
      if (row.report.truth != h) continue;
      const double nn = static_cast<double>(row.report.n);
      if (row.report.errors > 0) {
        mc_err.emplace_back(nn, std::log(row.report.err_estimate));
      } else {
        unresolved.push_back(row.report.n);
      }
      if (row.report.continued() > 0) {
        mc_cont.emplace_back(nn, std::log(row.report.continue_fraction()));
      }
      if (row.exact) {
        ex_err.emplace_back(nn, error_probability(*row.exact, h).log);
        const double lc = continue_probability(*row.exact, h).log;
        if (lc > -kInf) ex_cont.emplace_back(nn, lc);
      }
    }
    nlohmann::json fits;
    fits["mc_err"] = detail::fit_json(mc_err, units);
    fits["mc_err"]["unresolved_n"] = unresolved;
    fits["mc_continue"] = detail::fit_json(mc_cont, units);
    if (exact_ok) {
      fits["exact_err"] = detail::fit_json(ex_err, units);
      fits["exact_continue"] = detail::fit_json(ex_cont, units);
    }
    if (mc_err.size() < 2 && !exact_ok) any_missing = true;
    j["fits"][std::string(to_string(h))] = fits;
  }
  if (any_missing) {
    throw NumericalFailure(
        "sweep: error exponent unresolvable, fewer than two n values produced any "
        "Monte Carlo error and exact evaluation exceeds its guard");
  }
  std::ostringstream csv;
  write_sim_csv_header(csv);
  for (const auto& row : rows) detail::sim_csv_row(csv, row);
  OutputBundle files;
  files.add_json("sweep.json", j);
  files.add("sweep.csv", csv.str());
  detail::report_written(io, files.write(dir));
  return kExitOk;
}

inline const std::vector<double>& fig2_gammas() {
  static const std::vector<double> g = {0.05, 0.1, 0.2, 0.3};
  return g;
}
inline const std::vector<double>& fig3_gammas() {
  static const std::vector<double> g = {0.01, 0.03, 0.05, 0.07};
  return g;
}

/// Datasets behind the three standard plots; defaults to the
/// Bernoulli(0.9) vs Bernoulli(0.2) pair.
inline int cmd_figures(const ExperimentConfig& c, const CommandIo& io = {}) {
  ExperimentConfig cfg = c;
  if (!cfg.p1 && !cfg.p2) {
    const Pmf a = bernoulli(0.9);
    const Pmf b = bernoulli(0.2);
    cfg.p1 = std::vector<double>(a.probs().begin(), a.probs().end());
    cfg.p2 = std::vector<double>(b.probs().begin(), b.probs().end());
  }
  const HypothesisPair pair = pair_of(cfg, false);
  detail::require_finite_pair(pair);
  const Units units = units_of(cfg);
  const double s = unit_scale(units);
  const std::size_t grid = grid_of(cfg);
  const double tol = tol_of(cfg);
  const auto dir = detail::out_dir(cfg);
  const ChernoffPoint cp = chernoff(pair, tol);
  const KStar ks = kstar(pair, tol);
  const ExponentPair corner = seq_corner(pair);

  std::ostringstream fig1;
  {
    RegionCsvWriter w(fig1, units, {"series"});
    w.write(fd_boundary(pair, grid), {"fixed_length"});
    w.write(detail::corner_region(corner), {"sequential"});
  }

  std::ostringstream fig2;
  std::vector<RegionBoundary> r_gamma;
  {
    RegionCsvWriter w(fig2, units, {"gamma"});
    for (double g : fig2_gammas()) {
      r_gamma.push_back(gamma_region(pair, g, grid, tol));
      w.write(r_gamma.back(), {format_number(g * s)});
    }
  }
  bool nested = true;
  for (std::size_t i = 1; i < r_gamma.size(); ++i) {
    nested = nested && contains(r_gamma[i - 1], r_gamma[i], 1e-12);
  }

  std::ostringstream fig3;
  bool strict = true;
  const std::vector<std::size_t> ks_used = {2, std::max<std::size_t>(2, ks.k_min)};
  nlohmann::json fig3_checks = nlohmann::json::array();
  {
    RegionCsvWriter w(fig3, units, {"gamma", "k"});
    for (double g : fig3_gammas()) {
      if (g > cp.d_star) continue;
      std::vector<RegionBoundary> per_k;
      for (std::size_t k : ks_used) {
        per_k.push_back(two_phase_region(pair, g, k, grid, tol));
        w.write(per_k.back(), {format_number(g * s), std::to_string(k)});
      }
      const bool inside = ks_used[0] == ks_used[1] ||
                          strictly_contains(per_k[1], per_k[0], 1e-12);
      strict = strict && inside;
      fig3_checks.push_back({{"gamma", g * s}, {"k2_strictly_inside_kmin", inside}});
    }
  }

  nlohmann::json j = detail::base_json("figures", units);
  j["pair"] = detail::pair_json(pair, units);
  j["lambda_star"] = cp.lambda_star;
  j["d_star"] = cp.d_star * s;
  j["k_star"] = ks.raw;
  j["k_min"] = ks.k_min;
  j["seq_corner"] = {{"e1", corner.e1 * s}, {"e2", corner.e2 * s}};
  j["fig2_gammas"] = fig2_gammas();
  j["fig2_nested"] = nested;
  j["fig3_gammas"] = fig3_gammas();
  j["fig3_k"] = ks_used;
  j["fig3_checks"] = fig3_checks;
  j["fig3_strict"] = strict;

  OutputBundle files;
  files.add("fig1.csv", fig1.str());
  files.add("fig2.csv", fig2.str());
  files.add("fig3.csv", fig3.str());
  files.add_json("figures.json", j);
  detail::report_written(io, files.write(dir));
  return kExitOk;
}

/// Maps library exceptions onto process exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitConfig;
  if (dynamic_cast<const GuardExceeded*>(&e)) return kExitGuard;
  if (dynamic_cast<const NumericalFailure*>(&e)) return kExitNumerical;
  return kExitUnexpected;
}

template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    const char* label = code == kExitConfig      ? "config error"
                        : code == kExitGuard     ? "guard exceeded"
                        : code == kExitNumerical ? "numerical failure"
                                                 : "error";
    err << "afl: " << label << ": " << e.what() << '\n';
    return code;
  }
}

}  // namespace afl::app
