#ifndef SAS_HARNESS_HPP
#define SAS_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sas/algorithms.hpp"
#include "sas/envs.hpp"
#include "sas/policy.hpp"

namespace sas {

// ---------------------------------------------------------------------------
// Configuration

struct ToyConfig {
  std::size_t num_states = 3;
  std::size_t num_actions = 2;
  std::size_t successors = 2;
  double gamma = 0.99;
  std::size_t horizon = 50;
  std::uint64_t seed = 1;
};

enum class EnvironmentKind { routing, maze, recommender, toy };
enum class AlgorithmKind { sas_q, sas_pg, sas_npg };

std::string to_string(EnvironmentKind kind);
std::string to_string(AlgorithmKind kind);
EnvironmentKind environment_kind_from_string(const std::string& name);
AlgorithmKind algorithm_kind_from_string(const std::string& name);

struct EnvironmentConfig {
  EnvironmentKind kind = EnvironmentKind::routing;
  RoutingConfig routing;
  MazeConfig maze;
  RecommenderConfig recommender;
  ToyConfig toy;
  /// Order of the coupled Fourier basis used for the maze.
  std::size_t fourier_order = 3;

  double gamma() const;
};

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::sas_pg;
  QLearnerConfig q;
  PgConfig pg;
  NpgConfig npg;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  AlgorithmConfig algorithm;
  std::size_t episodes = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::size_t workers = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& config);

std::unique_ptr<Environment> make_environment(const EnvironmentConfig& config);
FeatureMap make_feature_map(const EnvironmentConfig& config);

// ---------------------------------------------------------------------------
// Running

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<double> returns;
  std::vector<double> discounted_returns;
  /// Empty unless the algorithm is SAS-PG.
  std::vector<Eigen::Vector2d> lambda_trace;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  Checkpoint final_parameters;
};

struct SummaryRow {
  std::size_t episode = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<SeedFailure> failures;
  std::vector<SummaryRow> summary;
};

/// Trains one seed in memory. The run's stream is derive_seed(master_seed, seed).
RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed);

/// Runs every seed (config.workers threads), writes seed_<s>.csv,
/// seed_<s>.ckpt, runs.csv and summary.csv into config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Per-seed CSV: "seed,episode,return,lambda1,lambda2"; lambda columns are
/// empty for algorithms without baseline weights.
std::string per_seed_csv(const RunRecord& record);
/// Summary CSV: "episode,mean,std"; std is the sample standard deviation
/// across seeds (0 for a single seed).
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

/// Mean return over the final 10% of episodes (at least one episode).
double final_window_score(const std::vector<double>& returns);

// ---------------------------------------------------------------------------
// Sweep

struct SweepConfig {
  ExperimentConfig base;
  /// Hyperparameter name -> values. Names: eta, epsilon, batch_size (sas-q);
  /// eta_theta, eta_v, eta_q, eta_lambda (sas-pg); eta_theta, eta_w (sas-npg).
  std::map<std::string, std::vector<double>> grid;
};

void from_json(const nlohmann::json& j, SweepConfig& config);
void to_json(nlohmann::json& j, const SweepConfig& config);

struct SweepRow {
  std::map<std::string, double> setting;
  double score = 0.0;
  std::size_t completed_seeds = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::size_t best = 0;
};

/// Evaluates the Cartesian grid in lexicographic key order, scoring each
/// setting by the mean over seeds of final_window_score. Writes
/// setting_<i>/ run outputs and sweep_report.csv under base.output_dir.
SweepReport sweep(const SweepConfig& config);
void apply_hyperparameter(AlgorithmConfig& algorithm, const std::string& name, double value);

// ---------------------------------------------------------------------------
// Counter-example demo

struct DivergenceTrace {
  double eta = 0.1;
  /// theta2 after each update, starting from the initial value.
  std::vector<double> constrained;
  std::vector<double> unconstrained;
  bool constrained_diverges = false;
  bool unconstrained_converges = false;
};

/// Replays the s1 -> s2 (right action, r = 0, gamma = 1) transition from
/// theta = [-2, -5]: once with A_{t+1} = {right} and once with both actions
/// available. Divergence means theta2 grew by (1 + eta) at every step;
/// convergence means |theta2 + 4| < 1e-3 at the end.
DivergenceTrace divergence_demo(double eta, std::size_t iterations);
std::string divergence_csv(const DivergenceTrace& trace);

// ---------------------------------------------------------------------------
// Oracle self-check

struct OracleCheckLine {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error <= tolerance; }
};

/// Cross-checks the exact gradient, baseline unbiasedness, Fisher routes
/// and Bellman fixed points on a random 3-state, 2-action tabular MDP.
std::vector<OracleCheckLine> oracle_check(std::uint64_t seed, std::size_t horizon);

}  // namespace sas

#endif  // SAS_HARNESS_HPP
