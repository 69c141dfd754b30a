#pragma once

// Experiment configuration: JSON file and/or command-line flags, validated
// in full before any computation or file output.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "afl/error.hpp"
#include "afl/exponents.hpp"
#include "afl/io.hpp"
#include "afl/pmf.hpp"
#include "afl/testbench.hpp"

namespace afl::app {

/// Invalid configuration; `field()` names the offending key.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& msg)
      : InvalidArgument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class TestKind { fixed, sprt, two_phase, rejection };
enum class TruthSel { h1, h2, both };

struct ExperimentConfig {
  std::optional<std::vector<double>> p1;
  std::optional<std::vector<double>> p2;
  std::optional<std::vector<double>> gamma;
  std::optional<std::size_t> k;
  std::optional<std::size_t> n;
  std::optional<std::vector<std::size_t>> n_values;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> lambda_grid;
  std::optional<std::string> out;
  std::optional<Units> units;
  std::optional<TestKind> test;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> delta;
  std::optional<std::size_t> max_samples;
  std::optional<double> phase2_lambda;
  std::optional<TruthSel> truth;
  std::optional<unsigned> workers;
  std::optional<double> tol;
  std::optional<std::vector<int>> moment_orders;
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "p1",    "p2",    "gamma", "k",     "n",           "n_values",      "trials",
      "seed",  "lambda_grid",    "out",   "units",       "test",          "alpha",
      "beta",  "delta", "max_samples",    "phase2_lambda", "truth",       "workers",
      "tol",   "moment_orders", "schema_version"};
  return keys;
}

inline Units parse_units(const std::string& s) {
  if (s == "nats") return Units::nats;
  if (s == "bits") return Units::bits;
  throw ConfigError("units", "expected \"nats\" or \"bits\", got \"" + s + "\"");
}

inline TestKind parse_test_kind(const std::string& s) {
  if (s == "fixed") return TestKind::fixed;
  if (s == "sprt") return TestKind::sprt;
  if (s == "two_phase") return TestKind::two_phase;
  if (s == "rejection") return TestKind::rejection;
  throw ConfigError("test", "expected fixed, sprt, two_phase or rejection, got \"" + s + "\"");
}

inline TruthSel parse_truth(const std::string& s) {
  if (s == "h1") return TruthSel::h1;
  if (s == "h2") return TruthSel::h2;
  if (s == "both") return TruthSel::both;
  throw ConfigError("truth", "expected h1, h2 or both, got \"" + s + "\"");
}

namespace detail {

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "wrong type (" + std::string(j.type_name()) + ")");
  }
}

inline std::uint64_t get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key, "must be an integer");
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const auto v = j.get<std::int64_t>();
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

inline std::vector<double> get_reals(const nlohmann::json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(key, "must be a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(key, "array entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known_keys().count(key)) throw ConfigError(key, "unknown key");
  }
  ExperimentConfig c;
  auto has = [&](const char* key) { return j.contains(key) && !j.at(key).is_null(); };
  if (has("p1")) c.p1 = detail::get_reals(j.at("p1"), "p1");
  if (has("p2")) c.p2 = detail::get_reals(j.at("p2"), "p2");
  if (has("gamma")) c.gamma = detail::get_reals(j.at("gamma"), "gamma");
  if (has("k")) c.k = detail::get_count(j.at("k"), "k");
  if (has("n")) c.n = detail::get_count(j.at("n"), "n");
  if (has("n_values")) {
    const auto& a = j.at("n_values");
    if (!a.is_array()) throw ConfigError("n_values", "must be an array of integers");
    std::vector<std::size_t> v;
    for (const auto& e : a) v.push_back(detail::get_count(e, "n_values"));
    c.n_values = v;
  }
  if (has("trials")) c.trials = detail::get_count(j.at("trials"), "trials");
  if (has("seed")) c.seed = detail::get_count(j.at("seed"), "seed");
  if (has("lambda_grid")) c.lambda_grid = detail::get_count(j.at("lambda_grid"), "lambda_grid");
  if (has("out")) c.out = detail::get_as<std::string>(j.at("out"), "out");
  if (has("units")) c.units = parse_units(detail::get_as<std::string>(j.at("units"), "units"));
  if (has("test")) c.test = parse_test_kind(detail::get_as<std::string>(j.at("test"), "test"));
  if (has("alpha")) c.alpha = detail::get_as<double>(j.at("alpha"), "alpha");
  if (has("beta")) c.beta = detail::get_as<double>(j.at("beta"), "beta");
  if (has("delta")) c.delta = detail::get_as<double>(j.at("delta"), "delta");
  if (has("max_samples")) c.max_samples = detail::get_count(j.at("max_samples"), "max_samples");
  if (has("phase2_lambda")) {
    c.phase2_lambda = detail::get_as<double>(j.at("phase2_lambda"), "phase2_lambda");
  }
  if (has("truth")) c.truth = parse_truth(detail::get_as<std::string>(j.at("truth"), "truth"));
  if (has("workers")) {
    c.workers = static_cast<unsigned>(detail::get_count(j.at("workers"), "workers"));
  }
  if (has("tol")) c.tol = detail::get_as<double>(j.at("tol"), "tol");
  if (has("moment_orders")) {
    c.moment_orders = detail::get_as<std::vector<int>>(j.at("moment_orders"), "moment_orders");
  }
  return c;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// Fields set in `over` replace those in `base`.
inline void overlay(ExperimentConfig& base, const ExperimentConfig& over) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(base.p1, over.p1);
  take(base.p2, over.p2);
  take(base.gamma, over.gamma);
  take(base.k, over.k);
  take(base.n, over.n);
  take(base.n_values, over.n_values);
  take(base.trials, over.trials);
  take(base.seed, over.seed);
  take(base.lambda_grid, over.lambda_grid);
  take(base.out, over.out);
  take(base.units, over.units);
  take(base.test, over.test);
  take(base.alpha, over.alpha);
  take(base.beta, over.beta);
  take(base.delta, over.delta);
  take(base.max_samples, over.max_samples);
  take(base.phase2_lambda, over.phase2_lambda);
  take(base.truth, over.truth);
  take(base.workers, over.workers);
  take(base.tol, over.tol);
  take(base.moment_orders, over.moment_orders);
}

// Accessors with defaults and field-level validation.

inline Units units_of(const ExperimentConfig& c) { return c.units.value_or(Units::nats); }

inline double tol_of(const ExperimentConfig& c) {
  const double t = c.tol.value_or(kDefaultTol);
  if (!(t > 0.0 && t < 1e-2)) throw ConfigError("tol", "must lie in (0, 0.01)");
  return t;
}

inline std::size_t grid_of(const ExperimentConfig& c) {
  const std::size_t g = c.lambda_grid.value_or(kDefaultGrid);
  if (g < 2) throw ConfigError("lambda_grid", "must be >= 2");
  return g;
}

inline std::uint64_t trials_of(const ExperimentConfig& c) {
  const std::uint64_t t = c.trials.value_or(100000);
  if (t == 0) throw ConfigError("trials", "must be >= 1");
  return t;
}

inline unsigned workers_of(const ExperimentConfig& c) { return c.workers.value_or(1); }

inline std::vector<int> moment_orders_of(const ExperimentConfig& c) {
  const auto v = c.moment_orders.value_or(std::vector<int>{1, 2});
  for (int l : v) {
    if (l < 1) throw ConfigError("moment_orders", "orders must be >= 1");
  }
  return v;
}

inline std::vector<Hypothesis> truths_of(const ExperimentConfig& c) {
  switch (c.truth.value_or(TruthSel::both)) {
    case TruthSel::h1: return {Hypothesis::h1};
    case TruthSel::h2: return {Hypothesis::h2};
    case TruthSel::both: break;
  }
  return {Hypothesis::h1, Hypothesis::h2};
}

inline Pmf pmf_field(const std::optional<std::vector<double>>& v, const char* field) {
  if (!v) throw ConfigError(field, "required");
  try {
    return Pmf(*v);
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

/// Builds the hypothesis pair; `allow_degenerate` permits P1 = P2.
inline HypothesisPair pair_of(const ExperimentConfig& c, bool allow_degenerate) {
  const Pmf p1 = pmf_field(c.p1, "p1");
  const Pmf p2 = pmf_field(c.p2, "p2");
  if (p1.size() != p2.size()) throw ConfigError("p2", "alphabet size differs from p1");
  HypothesisPair pair = [&] {
    try {
      return HypothesisPair(p1, p2);
    } catch (const InvalidArgument& e) {
      throw ConfigError("p2", e.what());
    }
  }();
  if (!allow_degenerate && pair.degenerate()) {
    throw ConfigError("p2", "degenerate pair: p1 and p2 are identical, hypotheses cannot be "
                            "distinguished");
  }
  return pair;
}

inline std::vector<double> gammas_of(const ExperimentConfig& c) {
  const auto v = c.gamma.value_or(std::vector<double>{});
  for (double g : v) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("gamma", "must be > 0");
  }
  return v;
}

inline double single_gamma(const ExperimentConfig& c) {
  const auto v = gammas_of(c);
  if (v.size() != 1) throw ConfigError("gamma", "exactly one value required");
  return v.front();
}

inline std::size_t k_of(const ExperimentConfig& c) {
  if (!c.k) throw ConfigError("k", "required");
  if (*c.k == 0) throw ConfigError("k", "must be >= 1");
  return *c.k;
}

/// Block lengths: n_values if given, otherwise the single n.
inline std::vector<std::size_t> lengths_of(const ExperimentConfig& c) {
  std::vector<std::size_t> v;
  if (c.n_values) {
    v = *c.n_values;
    if (v.empty()) throw ConfigError("n_values", "must not be empty");
  } else if (c.n) {
    v = {*c.n};
  } else {
    throw ConfigError("n", "required (or n_values)");
  }
  for (auto n : v) {
    if (n == 0) throw ConfigError(c.n_values ? "n_values" : "n", "must be >= 1");
  }
  return v;
}

/// Builds and validates the test configuration for block length n.
inline TestConfig test_of(const ExperimentConfig& c, const HypothesisPair& pair,
                          std::size_t n) {
  const TestKind kind = c.test.value_or(TestKind::fixed);
  TestConfig t;
  switch (kind) {
    case TestKind::fixed: {
      const double alpha = c.alpha.value_or(0.0);
      if (!std::isfinite(alpha)) throw ConfigError("alpha", "must be finite");
      t = FixedTest{n, alpha};
      break;
    }
    case TestKind::rejection: {
      if (!c.alpha) throw ConfigError("alpha", "required for the rejection test");
      if (!c.beta) throw ConfigError("beta", "required for the rejection test");
      if (*c.alpha < *c.beta) throw ConfigError("beta", "must not exceed alpha");
      t = RejectionTest{n, *c.alpha, *c.beta};
      break;
    }
    case TestKind::sprt: {
      SprtConfig s;
      s.n = n;
      s.delta = c.delta.value_or(0.1);
      s.max_samples = c.max_samples.value_or(10 * n);
      if (!(s.delta > 0.0)) throw ConfigError("delta", "must be > 0");
      if (pair.finite_divergences() &&
          !(s.delta < pair.kl12() && s.delta < pair.kl21())) {
        throw ConfigError("delta", "must be below both KL divergences");
      }
      if (s.max_samples == 0) throw ConfigError("max_samples", "must be >= 1");
      t = s;
      break;
    }
    case TestKind::two_phase: {
      const double gamma = single_gamma(c);
      const std::size_t k = k_of(c);
      if (c.phase2_lambda && !(*c.phase2_lambda >= 0.0 && *c.phase2_lambda <= 1.0)) {
        throw ConfigError("phase2_lambda", "must lie in [0, 1]");
      }
      try {
        t = TwoPhaseTest{n, two_phase_design(pair, gamma, k, c.phase2_lambda, tol_of(c))};
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidArgument& e) {
        throw ConfigError("gamma", e.what());
      }
      break;
    }
  }
  try {
    validate_test(pair, t);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("test", e.what());
  }
  return t;
}

inline nlohmann::json test_json(const TestConfig& t, Units units) {
  nlohmann::json j;
  j["kind"] = test_name(t);
  const double s = unit_scale(units);
  if (const auto* f = std::get_if<FixedTest>(&t)) {
    j["alpha"] = f->alpha * s;
  } else if (const auto* r = std::get_if<RejectionTest>(&t)) {
    j["alpha"] = r->alpha * s;
    j["beta"] = r->beta * s;
  } else if (const auto* sp = std::get_if<SprtConfig>(&t)) {
    j["delta"] = sp->delta * s;
    j["max_samples"] = sp->max_samples;
  } else if (const auto* tp = std::get_if<TwoPhaseTest>(&t)) {
    j["design"] = to_json(tp->design, units);
  }
  return j;
}

}  // namespace afl::app
