// Command-line front end for the SAS-MDP experiments.
//
//   sas_cli run --config exp.json [--seeds N | --seed-list 0,1,2] [--out DIR] [--workers K]
//   sas_cli sweep --config sweep.json [--seeds N | --seed-list ...] [--out DIR] [--workers K]
//   sas_cli demo-divergence [--eta 0.1] [--iterations 200] [--out DIR]
//   sas_cli oracle-check [--seed S] [--horizon H]
//   sas_cli print-config [--env routing] [--algorithm sas-pg]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "sas/harness.hpp"

namespace {

struct SeedOverrides {
  std::optional<std::size_t> num_seeds;
  std::vector<std::uint64_t> seed_list;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;

  void add_to(CLI::App& cmd) {
    auto* n = cmd.add_option("--seeds", num_seeds, "Run seeds 0..N-1");
    auto* list = cmd.add_option("--seed-list", seed_list, "Explicit comma-separated seeds")->delimiter(',');
    n->excludes(list);
    cmd.add_option("--out", out, "Output directory");
    cmd.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  }

  void apply(sas::ExperimentConfig& config) const {
    if (num_seeds) {
      config.seeds.resize(*num_seeds);
      for (std::size_t i = 0; i < *num_seeds; ++i) config.seeds[i] = i;
    }
    if (!seed_list.empty()) config.seeds = seed_list;
    if (out) config.output_dir = *out;
    if (workers) config.workers = *workers;
  }
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

int cmd_run(const std::string& config_path, const SeedOverrides& overrides) {
  sas::ExperimentConfig config = read_json(config_path).get<sas::ExperimentConfig>();
  overrides.apply(config);
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  sas::save_experiment_config((std::filesystem::path(config.output_dir) / "config.json").string(), config);

  const sas::ExperimentResult result = sas::run_experiment(config);
  for (const auto& r : result.records) {
    fmt::print("seed {}: final-window return {:.4f} ({:.2f}s)\n", r.seed, sas::final_window_score(r.returns),
               r.wall_seconds);
  }
  fmt::print("{} of {} seeds completed; outputs in {}\n", result.records.size(), config.seeds.size(),
             config.output_dir);
  return result.records.empty() ? 1 : 0;
}

int cmd_sweep(const std::string& config_path, const SeedOverrides& overrides) {
  sas::SweepConfig config = read_json(config_path).get<sas::SweepConfig>();
  overrides.apply(config.base);
  config.base.validate();
  const sas::SweepReport report = sas::sweep(config);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    std::string setting;
    for (const auto& [name, value] : row.setting) setting += fmt::format(" {}={:g}", name, value);
    fmt::print("{}{}:{} score {:.4f}\n", i == report.best ? "* " : "  ", i, setting, row.score);
  }
  fmt::print("report: {}\n", (std::filesystem::path(config.base.output_dir) / "sweep_report.csv").string());
  return 0;
}

int cmd_divergence(double eta, std::size_t iterations, const std::optional<std::string>& out) {
  const sas::DivergenceTrace trace = sas::divergence_demo(eta, iterations);
  fmt::print("constrained   (A_t+1 = {{right}}): theta2 {:.6g} -> {:.6g}  geometric growth x{:g}: {}\n",
             trace.constrained.front(), trace.constrained.back(), 1.0 + eta,
             trace.constrained_diverges ? "yes" : "no");
  fmt::print("unconstrained (A_t+1 = B):         theta2 {:.6g} -> {:.6g}  converged to -4: {}\n",
             trace.unconstrained.front(), trace.unconstrained.back(),
             trace.unconstrained_converges ? "yes" : "no");
  if (out) {
    std::filesystem::create_directories(*out);
    std::ofstream f(std::filesystem::path(*out) / "divergence.csv", std::ios::binary);
    f << sas::divergence_csv(trace);
  }
  return trace.constrained_diverges && trace.unconstrained_converges ? 0 : 1;
}

int cmd_oracle(std::uint64_t seed, std::size_t horizon) {
  bool ok = true;
  for (const auto& line : sas::oracle_check(seed, horizon)) {
    fmt::print("{} {:<45} error {:.3e} (tol {:.0e})\n", line.passed() ? "ok  " : "FAIL", line.name, line.error,
               line.tolerance);
    ok = ok && line.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic action set MDP experiments"};
  app.require_subcommand(1);

  std::string config_path;
  SeedOverrides run_overrides;
  auto* run = app.add_subcommand("run", "Train one configuration over several seeds");
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run_overrides.add_to(*run);

  std::string sweep_path;
  SeedOverrides sweep_overrides;
  auto* sw = app.add_subcommand("sweep", "Grid search over hyperparameters");
  sw->add_option("--config", sweep_path, "Sweep JSON ({\"base\": ..., \"grid\": ...})")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_overrides.add_to(*sw);

  double eta = 0.1;
  std::size_t iterations = 200;
  std::optional<std::string> demo_out;
  auto* demo = app.add_subcommand("demo-divergence", "Q-learning counter-example");
  demo->add_option("--eta", eta, "Step size")->check(CLI::PositiveNumber);
  demo->add_option("--iterations", iterations, "Number of updates")->check(CLI::PositiveNumber);
  demo->add_option("--out", demo_out, "Directory for divergence.csv");

  std::uint64_t oracle_seed = 1;
  std::size_t oracle_horizon = 8;
  auto* oracle = app.add_subcommand("oracle-check", "Exact-oracle self consistency on a random toy MDP");
  oracle->add_option("--seed", oracle_seed, "MDP seed");
  oracle->add_option("--horizon", oracle_horizon, "Finite horizon")->check(CLI::Range(1, 10));

  std::string env_name = "routing";
  std::string algo_name = "sas-pg";
  auto* print = app.add_subcommand("print-config", "Print a default experiment config");
  print->add_option("--env", env_name)->check(CLI::IsMember({"routing", "maze", "recommender", "toy"}));
  print->add_option("--algorithm", algo_name)->check(CLI::IsMember({"sas-q", "sas-pg", "sas-npg"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_overrides);
    if (*sw) return cmd_sweep(sweep_path, sweep_overrides);
    if (*demo) return cmd_divergence(eta, iterations, demo_out);
    if (*oracle) return cmd_oracle(oracle_seed, oracle_horizon);
    if (*print) {
      sas::ExperimentConfig config;
      config.environment.kind = sas::environment_kind_from_string(env_name);
      config.algorithm.kind = sas::algorithm_kind_from_string(algo_name);
      std::cout << nlohmann::json(config).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& ex) {
    fmt::print(stderr, "error: {}\n", ex.what());
    return 2;
  }
  return 0;
}
