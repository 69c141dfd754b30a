// afl: exponent regions, test design, exact evaluation and simulation for
// binary hypothesis tests over finite alphabets.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afl/app/commands.hpp"

namespace {

using afl::app::ExperimentConfig;

struct Flags {
  std::string config;
  std::vector<double> p1, p2, gamma;
  std::size_t k = 0, n = 0, grid = 0, max_samples = 0;
  std::vector<std::size_t> n_values;
  std::uint64_t trials = 0, seed = 0;
  std::string out, units, test, truth;
  double alpha = 0, beta = 0, delta = 0, phase2_lambda = 0, tol = 0;
  unsigned workers = 0;
  std::vector<int> moments;

  std::vector<std::pair<CLI::Option*, void (*)(const Flags&, ExperimentConfig&)>> opts;
};

void add_flags(CLI::App* sub, Flags& f) {
  auto reg = [&](CLI::Option* o, void (*apply)(const Flags&, ExperimentConfig&)) {
    f.opts.emplace_back(o, apply);
  };
  sub->add_option("--config", f.config, "JSON config file; flags override its fields");
  reg(sub->add_option("--p1", f.p1, "pmf of H1, comma separated")->delimiter(','),
      [](const Flags& f, ExperimentConfig& c) { c.p1 = f.p1; });
  reg(sub->add_option("--p2", f.p2, "pmf of H2, comma separated")->delimiter(','),
      [](const Flags& f, ExperimentConfig& c) { c.p2 = f.p2; });
  reg(sub->add_option("--gamma", f.gamma, "phase-I continuation exponent(s)")->delimiter(','),
      [](const Flags& f, ExperimentConfig& c) { c.gamma = f.gamma; });
  reg(sub->add_option("--k", f.k, "phase-II length multiplier"),
      [](const Flags& f, ExperimentConfig& c) { c.k = f.k; });
  reg(sub->add_option("--n", f.n, "block length"),
      [](const Flags& f, ExperimentConfig& c) { c.n = f.n; });
  reg(sub->add_option("--n-values", f.n_values, "block lengths, comma separated")
          ->delimiter(','),
      [](const Flags& f, ExperimentConfig& c) { c.n_values = f.n_values; });
  reg(sub->add_option("--trials", f.trials, "Monte Carlo trials per (n, hypothesis)"),
      [](const Flags& f, ExperimentConfig& c) { c.trials = f.trials; });
  reg(sub->add_option("--seed", f.seed, "master seed"),
      [](const Flags& f, ExperimentConfig& c) { c.seed = f.seed; });
  reg(sub->add_option("--lambda-grid", f.grid, "tilt grid size"),
      [](const Flags& f, ExperimentConfig& c) { c.lambda_grid = f.grid; });
  reg(sub->add_option("--units", f.units, "nats or bits"),
      [](const Flags& f, ExperimentConfig& c) { c.units = afl::app::parse_units(f.units); });
  reg(sub->add_option("--out", f.out, "output directory"),
      [](const Flags& f, ExperimentConfig& c) { c.out = f.out; });
  reg(sub->add_option("--test", f.test, "fixed, sprt, two_phase or rejection"),
      [](const Flags& f, ExperimentConfig& c) { c.test = afl::app::parse_test_kind(f.test); });
  reg(sub->add_option("--alpha", f.alpha, "threshold (fixed) or upper threshold (rejection)"),
      [](const Flags& f, ExperimentConfig& c) { c.alpha = f.alpha; });
  reg(sub->add_option("--beta", f.beta, "lower threshold (rejection)"),
      [](const Flags& f, ExperimentConfig& c) { c.beta = f.beta; });
  reg(sub->add_option("--delta", f.delta, "SPRT threshold backoff"),
      [](const Flags& f, ExperimentConfig& c) { c.delta = f.delta; });
  reg(sub->add_option("--max-samples", f.max_samples, "SPRT truncation horizon"),
      [](const Flags& f, ExperimentConfig& c) { c.max_samples = f.max_samples; });
  reg(sub->add_option("--phase2-lambda", f.phase2_lambda, "phase-II tilt in [0,1]"),
      [](const Flags& f, ExperimentConfig& c) { c.phase2_lambda = f.phase2_lambda; });
  reg(sub->add_option("--truth", f.truth, "h1, h2 or both"),
      [](const Flags& f, ExperimentConfig& c) { c.truth = afl::app::parse_truth(f.truth); });
  reg(sub->add_option("--workers", f.workers, "simulation threads (0 = all cores)"),
      [](const Flags& f, ExperimentConfig& c) { c.workers = f.workers; });
  reg(sub->add_option("--tol", f.tol, "root-finding tolerance"),
      [](const Flags& f, ExperimentConfig& c) { c.tol = f.tol; });
  reg(sub->add_option("--moments", f.moments, "stopping-time moment orders")->delimiter(','),
      [](const Flags& f, ExperimentConfig& c) { c.moment_orders = f.moments; });
}

ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) c = afl::app::load_config_file(f.config);
  for (const auto& [opt, apply] : f.opts) {
    if (opt->count() > 0) apply(f, c);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponent regions and two-phase hypothesis tests"};
  app.require_subcommand(1);

  using Command = int (*)(const ExperimentConfig&, const afl::app::CommandIo&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"region", "write exponent-region CSVs and a JSON summary", afl::app::cmd_region},
      {"design", "print the two-phase design for (gamma, k)", afl::app::cmd_design},
      {"exact", "exact error probabilities by type enumeration", afl::app::cmd_exact},
      {"simulate", "Monte Carlo error and stopping-time estimates", afl::app::cmd_simulate},
      {"sweep", "Monte Carlo over an n grid with fitted exponents", afl::app::cmd_sweep},
      {"figures", "CSV datasets for the standard region plots", afl::app::cmd_figures},
  };
  std::vector<Flags> flags(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    subs.push_back(app.add_subcommand(std::get<0>(commands[i]), std::get<1>(commands[i])));
    add_flags(subs.back(), flags[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return afl::app::kExitConfig;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    return afl::app::guarded(
        [&] {
          const ExperimentConfig cfg = build_config(flags[i]);
          return std::get<2>(commands[i])(cfg, afl::app::CommandIo{});
        },
        std::cerr);
  }
  return afl::app::kExitConfig;
}
