#include "sas/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/core.h>

#include "sas/oracle.hpp"

namespace sas {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Names

std::string to_string(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::routing: return "routing";
    case EnvironmentKind::maze: return "maze";
    case EnvironmentKind::recommender: return "recommender";
    case EnvironmentKind::toy: return "toy";
  }
  throw ContractViolation("to_string: unknown environment kind");
}

std::string to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::sas_q: return "sas-q";
    case AlgorithmKind::sas_pg: return "sas-pg";
    case AlgorithmKind::sas_npg: return "sas-npg";
  }
  throw ContractViolation("to_string: unknown algorithm kind");
}

EnvironmentKind environment_kind_from_string(const std::string& name) {
  if (name == "routing") return EnvironmentKind::routing;
  if (name == "maze") return EnvironmentKind::maze;
  if (name == "recommender") return EnvironmentKind::recommender;
  if (name == "toy") return EnvironmentKind::toy;
  throw ContractViolation("unknown environment '" + name + "'");
}

AlgorithmKind algorithm_kind_from_string(const std::string& name) {
  if (name == "sas-q") return AlgorithmKind::sas_q;
  if (name == "sas-pg") return AlgorithmKind::sas_pg;
  if (name == "sas-npg") return AlgorithmKind::sas_npg;
  throw ContractViolation("unknown algorithm '" + name + "'");
}

double EnvironmentConfig::gamma() const {
  switch (kind) {
    case EnvironmentKind::routing: return routing.gamma;
    case EnvironmentKind::maze: return maze.gamma;
    case EnvironmentKind::recommender: return recommender.gamma;
    case EnvironmentKind::toy: return toy.gamma;
  }
  throw ContractViolation("EnvironmentConfig: unknown kind");
}

void ExperimentConfig::validate() const {
  if (episodes == 0) throw ContractViolation("config: episodes must be positive");
  if (seeds.empty()) throw ContractViolation("config: at least one seed is required");
  if (workers == 0) throw ContractViolation("config: workers must be positive");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractViolation("config: duplicate seeds");
  const double g = environment.gamma();
  if (!(g >= 0.0 && g < 1.0)) throw ContractViolation("config: gamma must lie in [0, 1)");
  algorithm.q.validate();
  const PgConfig& pg = algorithm.pg;
  if (!(pg.eta_theta > 0.0 && pg.eta_v > 0.0 && pg.eta_q > 0.0))
    throw ContractViolation("config: sas-pg learning rates must be positive");
  if (!(pg.eta_lambda >= 0.0 && pg.eta_lambda <= 1.0))
    throw ContractViolation("config: eta_lambda must lie in [0, 1]");
  if (!(pg.ridge >= 0.0)) throw ContractViolation("config: ridge must be non-negative");
  if (!(algorithm.npg.eta_theta > 0.0 && algorithm.npg.eta_w > 0.0))
    throw ContractViolation("config: sas-npg learning rates must be positive");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec2_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector2d vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ContractViolation("config: expected a 2-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

// Reads `key` into `field` when present; unknown keys are rejected by the caller.
template <class T>
void read_opt(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->template get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ContractViolation(std::string("config: '") + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ContractViolation(std::string("config: unknown key '") + key + "' in " + where);
  }
}

json env_json(const EnvironmentConfig& e) {
  json j;
  j["kind"] = to_string(e.kind);
  switch (e.kind) {
    case EnvironmentKind::routing: {
      const auto& c = e.routing;
      j["num_nodes"] = c.num_nodes;
      j["edge_density"] = c.edge_density;
      j["availability_prob"] = c.availability_prob;
      j["step_penalty"] = c.step_penalty;
      j["goal_reward"] = c.goal_reward;
      j["gamma"] = c.gamma;
      j["horizon"] = c.horizon;
      j["seed"] = c.seed;
      j["max_attempts"] = c.max_attempts;
      break;
    }
    case EnvironmentKind::maze: {
      const auto& c = e.maze;
      j["num_actuators"] = c.num_actuators;
      j["step_size"] = c.step_size;
      j["step_penalty"] = c.step_penalty;
      j["goal_reward"] = c.goal_reward;
      j["goal_center"] = vec2_json(c.goal_center);
      j["goal_radius"] = c.goal_radius;
      json walls = json::array();
      for (const auto& w : c.walls) walls.push_back({{"from", vec2_json(w.from)}, {"to", vec2_json(w.to)}});
      j["walls"] = walls;
      j["availability_prob"] = c.availability_prob;
      j["gamma"] = c.gamma;
      j["horizon"] = c.horizon;
      j["fourier_order"] = e.fourier_order;
      break;
    }
    case EnvironmentKind::recommender: {
      const auto& c = e.recommender;
      j["num_products"] = c.num_products;
      j["context_dim"] = c.context_dim;
      j["mean_of_means"] = c.mean_of_means;
      j["sd_of_means"] = c.sd_of_means;
      j["noise_sd"] = c.noise_sd;
      j["episode_length"] = c.episode_length;
      j["availability_prob"] = c.availability_prob;
      j["gamma"] = c.gamma;
      j["seed"] = c.seed;
      break;
    }
    case EnvironmentKind::toy: {
      const auto& c = e.toy;
      j["num_states"] = c.num_states;
      j["num_actions"] = c.num_actions;
      j["successors"] = c.successors;
      j["gamma"] = c.gamma;
      j["horizon"] = c.horizon;
      j["seed"] = c.seed;
      break;
    }
  }
  return j;
}

EnvironmentConfig env_from(const json& j) {
  EnvironmentConfig e;
  e.kind = environment_kind_from_string(j.at("kind").get<std::string>());
  switch (e.kind) {
    case EnvironmentKind::routing: {
      reject_unknown(j, {"kind", "num_nodes", "edge_density", "availability_prob", "step_penalty",
                         "goal_reward", "gamma", "horizon", "seed", "max_attempts"},
                     "environment");
      auto& c = e.routing;
      read_opt(j, "num_nodes", c.num_nodes);
      read_opt(j, "edge_density", c.edge_density);
      read_opt(j, "availability_prob", c.availability_prob);
      read_opt(j, "step_penalty", c.step_penalty);
      read_opt(j, "goal_reward", c.goal_reward);
      read_opt(j, "gamma", c.gamma);
      read_opt(j, "horizon", c.horizon);
      read_opt(j, "seed", c.seed);
      read_opt(j, "max_attempts", c.max_attempts);
      break;
    }
    case EnvironmentKind::maze: {
      reject_unknown(j, {"kind", "num_actuators", "step_size", "step_penalty", "goal_reward",
                         "goal_center", "goal_radius", "walls", "availability_prob", "gamma",
                         "horizon", "fourier_order"},
                     "environment");
      auto& c = e.maze;
      read_opt(j, "num_actuators", c.num_actuators);
      read_opt(j, "step_size", c.step_size);
      read_opt(j, "step_penalty", c.step_penalty);
      read_opt(j, "goal_reward", c.goal_reward);
      if (j.contains("goal_center")) c.goal_center = vec2_from(j.at("goal_center"));
      read_opt(j, "goal_radius", c.goal_radius);
      if (j.contains("walls")) {
        c.walls.clear();
        for (const auto& w : j.at("walls"))
          c.walls.push_back(WallSegment{vec2_from(w.at("from")), vec2_from(w.at("to"))});
      }
      read_opt(j, "availability_prob", c.availability_prob);
      read_opt(j, "gamma", c.gamma);
      read_opt(j, "horizon", c.horizon);
      read_opt(j, "fourier_order", e.fourier_order);
      break;
    }
    case EnvironmentKind::recommender: {
      reject_unknown(j, {"kind", "num_products", "context_dim", "mean_of_means", "sd_of_means",
                         "noise_sd", "episode_length", "availability_prob", "gamma", "seed"},
                     "environment");
      auto& c = e.recommender;
      read_opt(j, "num_products", c.num_products);
      read_opt(j, "context_dim", c.context_dim);
      read_opt(j, "mean_of_means", c.mean_of_means);
      read_opt(j, "sd_of_means", c.sd_of_means);
      read_opt(j, "noise_sd", c.noise_sd);
      read_opt(j, "episode_length", c.episode_length);
      read_opt(j, "availability_prob", c.availability_prob);
      read_opt(j, "gamma", c.gamma);
      read_opt(j, "seed", c.seed);
      break;
    }
    case EnvironmentKind::toy: {
      reject_unknown(j, {"kind", "num_states", "num_actions", "successors", "gamma", "horizon", "seed"},
                     "environment");
      auto& c = e.toy;
      read_opt(j, "num_states", c.num_states);
      read_opt(j, "num_actions", c.num_actions);
      read_opt(j, "successors", c.successors);
      read_opt(j, "gamma", c.gamma);
      read_opt(j, "horizon", c.horizon);
      read_opt(j, "seed", c.seed);
      break;
    }
  }
  return e;
}

json algo_json(const AlgorithmConfig& a) {
  json j;
  j["name"] = to_string(a.kind);
  switch (a.kind) {
    case AlgorithmKind::sas_q:
      j["eta"] = a.q.eta;
      j["epsilon"] = a.q.epsilon;
      j["batch_size"] = a.q.batch_size;
      break;
    case AlgorithmKind::sas_pg:
      j["eta_theta"] = a.pg.eta_theta;
      j["eta_v"] = a.pg.eta_v;
      j["eta_q"] = a.pg.eta_q;
      j["eta_lambda"] = a.pg.eta_lambda;
      j["ridge"] = a.pg.ridge;
      j["per_step"] = a.pg.per_step;
      j["adapt_lambda"] = a.pg.adapt_lambda;
      j["lambda_target"] = a.pg.lambda_target == LambdaTarget::q_hat ? "q-hat" : "return";
      break;
    case AlgorithmKind::sas_npg:
      j["eta_theta"] = a.npg.eta_theta;
      j["eta_w"] = a.npg.eta_w;
      break;
  }
  return j;
}

AlgorithmConfig algo_from(const json& j) {
  AlgorithmConfig a;
  a.kind = algorithm_kind_from_string(j.at("name").get<std::string>());
  switch (a.kind) {
    case AlgorithmKind::sas_q:
      reject_unknown(j, {"name", "eta", "epsilon", "batch_size"}, "algorithm");
      read_opt(j, "eta", a.q.eta);
      read_opt(j, "epsilon", a.q.epsilon);
      read_opt(j, "batch_size", a.q.batch_size);
      break;
    case AlgorithmKind::sas_pg: {
      reject_unknown(j, {"name", "eta_theta", "eta_v", "eta_q", "eta_lambda", "ridge", "per_step",
                         "adapt_lambda", "lambda_target"},
                     "algorithm");
      read_opt(j, "eta_theta", a.pg.eta_theta);
      read_opt(j, "eta_v", a.pg.eta_v);
      read_opt(j, "eta_q", a.pg.eta_q);
      read_opt(j, "eta_lambda", a.pg.eta_lambda);
      read_opt(j, "ridge", a.pg.ridge);
      read_opt(j, "per_step", a.pg.per_step);
      read_opt(j, "adapt_lambda", a.pg.adapt_lambda);
      std::string target = "return";
      read_opt(j, "lambda_target", target);
      if (target == "return") a.pg.lambda_target = LambdaTarget::sampled_return;
      else if (target == "q-hat") a.pg.lambda_target = LambdaTarget::q_hat;
      else throw ContractViolation("config: lambda_target must be 'return' or 'q-hat'");
      break;
    }
    case AlgorithmKind::sas_npg:
      reject_unknown(j, {"name", "eta_theta", "eta_w"}, "algorithm");
      read_opt(j, "eta_theta", a.npg.eta_theta);
      read_opt(j, "eta_w", a.npg.eta_w);
      break;
  }
  return a;
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"environment", env_json(c.environment)},
           {"algorithm", algo_json(c.algorithm)},
           {"episodes", c.episodes},
           {"seeds", c.seeds},
           {"master_seed", c.master_seed},
           {"output_dir", c.output_dir},
           {"workers", c.workers}};
}

void from_json(const json& j, ExperimentConfig& c) {
  reject_unknown(j, {"environment", "algorithm", "episodes", "seeds", "num_seeds", "master_seed",
                     "output_dir", "workers"},
                 "experiment");
  c = ExperimentConfig{};
  if (j.contains("environment")) c.environment = env_from(j.at("environment"));
  if (j.contains("algorithm")) c.algorithm = algo_from(j.at("algorithm"));
  read_opt(j, "episodes", c.episodes);
  if (j.contains("seeds") && j.contains("num_seeds"))
    throw ContractViolation("config: give either 'seeds' or 'num_seeds', not both");
  read_opt(j, "seeds", c.seeds);
  if (j.contains("num_seeds")) {
    const auto n = j.at("num_seeds").get<std::size_t>();
    c.seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.seeds[i] = i;
  }
  read_opt(j, "master_seed", c.master_seed);
  read_opt(j, "output_dir", c.output_dir);
  read_opt(j, "workers", c.workers);
  c.algorithm.q.gamma = c.environment.gamma();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  ExperimentConfig config = json::parse(in).get<ExperimentConfig>();
  config.validate();
  return config;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << json(config).dump(2) << '\n';
}

void to_json(json& j, const SweepConfig& c) {
  j = json{{"base", json(c.base)}, {"grid", c.grid}};
}

void from_json(const json& j, SweepConfig& c) {
  reject_unknown(j, {"base", "grid"}, "sweep");
  c.base = j.at("base").get<ExperimentConfig>();
  c.grid = j.at("grid").get<std::map<std::string, std::vector<double>>>();
}

// ---------------------------------------------------------------------------
// Environments and learners

std::unique_ptr<Environment> make_environment(const EnvironmentConfig& config) {
  switch (config.kind) {
    case EnvironmentKind::routing:
      return std::make_unique<RoutingGraphEnv>(make_routing_env(config.routing));
    case EnvironmentKind::maze: return std::make_unique<MazeEnv>(config.maze);
    case EnvironmentKind::recommender: return std::make_unique<RecommenderEnv>(config.recommender);
    case EnvironmentKind::toy: {
      const auto& t = config.toy;
      return std::make_unique<TabularToyEnv>(
          make_random_tabular_mdp(t.num_states, t.num_actions, t.gamma, t.seed, t.successors), t.horizon);
    }
  }
  throw ContractViolation("make_environment: unknown kind");
}

FeatureMap make_feature_map(const EnvironmentConfig& config) {
  switch (config.kind) {
    case EnvironmentKind::routing: return FeatureMap::one_hot(config.routing.num_nodes);
    case EnvironmentKind::maze: return FeatureMap::fourier(config.fourier_order, 2);
    case EnvironmentKind::recommender: return FeatureMap::identity(config.recommender.context_dim);
    case EnvironmentKind::toy: return FeatureMap::one_hot(config.toy.num_states);
  }
  throw ContractViolation("make_feature_map: unknown kind");
}

namespace {

double undiscounted(const Trajectory& traj) {
  double total = 0.0;
  for (const auto& tr : traj.transitions) total += tr.reward;
  return total;
}

void record_episode(RunRecord& record, const Trajectory& traj) {
  record.returns.push_back(undiscounted(traj));
  record.discounted_returns.push_back(traj.returns.empty() ? 0.0 : traj.returns.front());
}

Eigen::MatrixXd as_matrix(const Eigen::VectorXd& flat, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), static_cast<Eigen::Index>(rows),
                                           static_cast<Eigen::Index>(cols));
}

}  // namespace

RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const auto env = make_environment(config.environment);
  const FeatureMap features = make_feature_map(config.environment);
  const std::size_t num_actions = env->spec().num_base_actions;
  const std::size_t horizon = env->spec().horizon;
  Rng rng(derive_seed(config.master_seed, seed));

  RunRecord record;
  record.seed = seed;
  record.returns.reserve(config.episodes);
  record.discounted_returns.reserve(config.episodes);

  switch (config.algorithm.kind) {
    case AlgorithmKind::sas_q: {
      QLearnerConfig qc = config.algorithm.q;
      qc.gamma = env->spec().gamma;
      SasQLearner learner = SasQLearner::linear(features, num_actions, qc);
      for (std::size_t e = 0; e < config.episodes; ++e) record_episode(record, learner.run_episode(*env, rng));
      record.final_parameters.kind = features.kind();
      record.final_parameters.theta = as_matrix(learner.weights(), features.dim(), num_actions);
      break;
    }
    case AlgorithmKind::sas_pg: {
      SasPgLearner learner(MaskedSoftmaxPolicy(features, num_actions), config.algorithm.pg);
      record.lambda_trace.reserve(config.episodes);
      auto choose = [&](const State& s, const ActionSet& a, Rng& r) { return learner.act(s, a, r); };
      for (std::size_t e = 0; e < config.episodes; ++e) {
        const Trajectory traj = rollout(*env, choose, horizon, rng);
        learner.sas_pg_episode(traj);
        record_episode(record, traj);
        record.lambda_trace.push_back(learner.lambda().a);
      }
      record.final_parameters.kind = features.kind();
      record.final_parameters.theta = learner.policy().theta();
      record.final_parameters.value_weights = learner.value().weights();
      record.final_parameters.q_weights = learner.q().weights();
      break;
    }
    case AlgorithmKind::sas_npg: {
      SasNpgLearner learner(MaskedSoftmaxPolicy(features, num_actions), config.algorithm.npg);
      auto choose = [&](const State& s, const ActionSet& a, Rng& r) { return learner.act(s, a, r); };
      for (std::size_t e = 0; e < config.episodes; ++e) {
        const Trajectory traj = rollout(*env, choose, horizon, rng);
        learner.sas_npg_episode(traj);
        record_episode(record, traj);
      }
      record.final_parameters.kind = features.kind();
      record.final_parameters.theta = learner.policy().theta();
      break;
    }
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::string per_seed_csv(const RunRecord& record) {
  std::string out = "seed,episode,return,lambda1,lambda2\n";
  const bool has_lambda = !record.lambda_trace.empty();
  for (std::size_t e = 0; e < record.returns.size(); ++e) {
    if (has_lambda) {
      const Eigen::Vector2d& l = record.lambda_trace[e];
      out += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", record.seed, e, record.returns[e], l.x(), l.y());
    } else {
      out += fmt::format("{},{},{:.17g},,\n", record.seed, e, record.returns[e]);
    }
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  if (records.empty()) return rows;
  std::size_t episodes = records.front().returns.size();
  for (const auto& r : records) episodes = std::min(episodes, r.returns.size());
  const double n = static_cast<double>(records.size());
  rows.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    double mean = 0.0;
    for (const auto& r : records) mean += r.returns[e];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : records) ss += (r.returns[e] - mean) * (r.returns[e] - mean);
    rows.push_back(SummaryRow{e, mean, records.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0});
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "episode,mean,std\n";
  for (const auto& r : rows) out += fmt::format("{},{:.17g},{:.17g}\n", r.episode, r.mean, r.std);
  return out;
}

double final_window_score(const std::vector<double>& returns) {
  if (returns.empty()) throw ContractViolation("final_window_score: no episodes");
  const std::size_t window = std::max<std::size_t>(1, returns.size() / 10);
  double total = 0.0;
  for (std::size_t i = returns.size() - window; i < returns.size(); ++i) total += returns[i];
  return total / static_cast<double>(window);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);

  const std::size_t n = config.seeds.size();
  std::vector<std::optional<RunRecord>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const std::uint64_t seed = config.seeds[i];
      try {
        RunRecord record = run_seed(config, seed);
        write_text(dir / fmt::format("seed_{}.csv", seed), per_seed_csv(record));
        record.checkpoint_path = (dir / fmt::format("seed_{}.ckpt", seed)).string();
        save_checkpoint(record.checkpoint_path, record.final_parameters);
        slots[i] = std::move(record);
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  const std::size_t threads = std::min(config.workers, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentResult result;
  std::string runs = "seed,status,wall_seconds,checkpoint\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      runs += fmt::format("{},ok,{:.3f},{}\n", slots[i]->seed, slots[i]->wall_seconds, slots[i]->checkpoint_path);
      result.records.push_back(std::move(*slots[i]));
    } else {
      runs += fmt::format("{},failed,,\n", config.seeds[i]);
      result.failures.push_back(SeedFailure{config.seeds[i], errors[i]});
    }
  }
  write_text(dir / "runs.csv", runs);
  if (!result.failures.empty()) {
    fmt::print(stderr, "warning: {} of {} seeds failed; summary covers {} completed seeds\n",
               result.failures.size(), n, result.records.size());
    for (const auto& f : result.failures) fmt::print(stderr, "  seed {}: {}\n", f.seed, f.message);
  }
  result.summary = summarize(result.records);
  write_text(dir / "summary.csv", summary_csv(result.summary));
  return result;
}

// ---------------------------------------------------------------------------
// Sweep

void apply_hyperparameter(AlgorithmConfig& a, const std::string& name, double value) {
  auto bad = [&] {
    throw ContractViolation("sweep: '" + name + "' is not a hyperparameter of " + to_string(a.kind));
  };
  switch (a.kind) {
    case AlgorithmKind::sas_q:
      if (name == "eta") a.q.eta = value;
      else if (name == "epsilon") a.q.epsilon = value;
      else if (name == "batch_size") {
        if (!(value >= 1.0) || value != std::floor(value))
          throw ContractViolation("sweep: batch_size must be a positive integer");
        a.q.batch_size = static_cast<std::size_t>(value);
      } else bad();
      break;
    case AlgorithmKind::sas_pg:
      if (name == "eta_theta") a.pg.eta_theta = value;
      else if (name == "eta_v") a.pg.eta_v = value;
      else if (name == "eta_q") a.pg.eta_q = value;
      else if (name == "eta_lambda") a.pg.eta_lambda = value;
      else bad();
      break;
    case AlgorithmKind::sas_npg:
      if (name == "eta_theta") a.npg.eta_theta = value;
      else if (name == "eta_w") a.npg.eta_w = value;
      else bad();
      break;
  }
}

SweepReport sweep(const SweepConfig& config) {
  if (config.grid.empty()) throw ContractViolation("sweep: empty grid");
  for (const auto& [name, values] : config.grid) {
    if (values.empty()) throw ContractViolation("sweep: no values for '" + name + "'");
    AlgorithmConfig probe = config.base.algorithm;
    apply_hyperparameter(probe, name, values.front());
  }

  std::vector<std::map<std::string, double>> settings{{}};
  for (const auto& [name, values] : config.grid) {
    std::vector<std::map<std::string, double>> expanded;
    for (const auto& partial : settings) {
      for (double v : values) {
        auto s = partial;
        s[name] = v;
        expanded.push_back(std::move(s));
      }
    }
    settings = std::move(expanded);
  }

  const fs::path root(config.base.output_dir);
  fs::create_directories(root);
  SweepReport report;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < settings.size(); ++i) {
    ExperimentConfig run = config.base;
    for (const auto& [name, value] : settings[i]) apply_hyperparameter(run.algorithm, name, value);
    run.output_dir = (root / fmt::format("setting_{}", i)).string();
    const ExperimentResult result = run_experiment(run);

    SweepRow row{settings[i], -std::numeric_limits<double>::infinity(), result.records.size()};
    if (!result.records.empty()) {
      double total = 0.0;
      for (const auto& r : result.records) total += final_window_score(r.returns);
      row.score = total / static_cast<double>(result.records.size());
    }
    if (row.score > best_score) {
      best_score = row.score;
      report.best = i;
    }
    report.rows.push_back(std::move(row));
  }

  std::string csv = "setting";
  for (const auto& [name, _] : config.grid) csv += "," + name;
  csv += ",completed_seeds,score,best\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    csv += fmt::format("{}", i);
    for (const auto& [_, value] : row.setting) csv += fmt::format(",{:.17g}", value);
    csv += fmt::format(",{},{:.17g},{}\n", row.completed_seeds, row.score, i == report.best ? 1 : 0);
  }
  write_text(root / "sweep_report.csv", csv);
  return report;
}

// ---------------------------------------------------------------------------
// Counter-example

DivergenceTrace divergence_demo(double eta, std::size_t iterations) {
  if (!(eta > 0.0)) throw ContractViolation("divergence_demo: eta must be positive");
  if (iterations == 0) throw ContractViolation("divergence_demo: iterations must be positive");

  QLearnerConfig qc;
  qc.eta = eta;
  qc.gamma = 1.0;
  const Eigen::Vector2d theta0(-2.0, -5.0);
  const Transition tr{State{CounterexampleEnv::kLeft}, ActionSet::all(2), CounterexampleEnv::kRightAction,
                      0.0, State{CounterexampleEnv::kRight}, false};
  const ActionSet only_right = ActionSet::from_bits(2, std::uint64_t{1} << CounterexampleEnv::kRightAction);
  const ActionSet both = ActionSet::all(2);

  DivergenceTrace trace;
  trace.eta = eta;
  SasQLearner constrained = SasQLearner::counterexample(theta0, qc);
  SasQLearner unconstrained = SasQLearner::counterexample(theta0, qc);
  trace.constrained.push_back(theta0.y());
  trace.unconstrained.push_back(theta0.y());
  for (std::size_t k = 0; k < iterations; ++k) {
    constrained.sas_q_step(tr, &only_right);
    unconstrained.sas_q_step(tr, &both);
    trace.constrained.push_back(constrained.weights()(1));
    trace.unconstrained.push_back(unconstrained.weights()(1));
  }

  trace.constrained_diverges = true;
  for (std::size_t k = 1; k < trace.constrained.size(); ++k) {
    const double ratio = trace.constrained[k] / trace.constrained[k - 1];
    if (!(std::abs(ratio - (1.0 + eta)) <= 1e-9)) trace.constrained_diverges = false;
  }
  trace.unconstrained_converges = std::abs(trace.unconstrained.back() + 4.0) < 1e-3;
  return trace;
}

std::string divergence_csv(const DivergenceTrace& trace) {
  std::string out = "iteration,constrained_theta2,unconstrained_theta2\n";
  for (std::size_t k = 0; k < trace.constrained.size(); ++k)
    out += fmt::format("{},{:.17g},{:.17g}\n", k, trace.constrained[k], trace.unconstrained[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Oracle self-check

std::vector<OracleCheckLine> oracle_check(std::uint64_t seed, std::size_t horizon) {
  if (horizon == 0) throw ContractViolation("oracle_check: horizon must be positive");
  const TabularSasMdp mdp = make_random_tabular_mdp(3, 2, 0.9, seed, 2);
  Rng rng(derive_seed(seed, 1));
  Eigen::MatrixXd theta(3, 2);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = rng.normal(0.0, 1.0);
  MaskedSoftmaxPolicy policy(FeatureMap::one_hot(3), theta);
  const TabularPolicy pi = as_tabular_policy(policy);

  std::vector<OracleCheckLine> lines;
  const Eigen::VectorXd grad = exact_grad_J(mdp, policy, horizon);

  // Central differences of the exact finite-horizon return.
  Eigen::VectorXd fd(grad.size());
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    MaskedSoftmaxPolicy plus = policy;
    MaskedSoftmaxPolicy minus = policy;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(grad.size());
    e(i) = h;
    plus.add_flat(e);
    minus.add_flat(-e);
    fd(i) = (exact_J(mdp, as_tabular_policy(plus), horizon).value -
             exact_J(mdp, as_tabular_policy(minus), horizon).value) / (2.0 * h);
  }
  const double scale = std::max(1.0, grad.norm());
  lines.push_back({"grad J vs finite differences (relative)", (grad - fd).norm() / scale, 1e-4});

  const Eigen::VectorXd score = enumerated_score_gradient(mdp, policy, horizon);
  lines.push_back({"grad J vs enumerated score gradient", (grad - score).cwiseAbs().maxCoeff(), 1e-8});

  Eigen::VectorXd vw(3);
  Eigen::MatrixXd qw(3, 2);
  for (Eigen::Index i = 0; i < vw.size(); ++i) vw(i) = rng.normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < qw.size(); ++i) qw.data()[i] = rng.normal(0.0, 1.0);
  const ValueEstimator value(vw);
  const QEstimator q(qw);
  double worst = 0.0;
  for (const Eigen::Vector2d& l : {Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, 0), Eigen::Vector2d(0, -1),
                                  Eigen::Vector2d(1, 1)}) {
    LambdaWeights lambda;
    lambda.a = l;
    const Eigen::VectorXd g = enumerated_baseline_gradient(mdp, policy, horizon, value, q, lambda);
    worst = std::max(worst, (g - grad).cwiseAbs().maxCoeff());
  }
  lines.push_back({"baseline gradient unbiased across lambda", worst, 1e-10});

  try {
    const NaturalGradient ng = natural_grad(mdp, policy, horizon);
    lines.push_back({"natural gradient: Fisher vs least squares", ng.discrepancy, 1e-6});
  } catch (const NumericalError& ex) {
    lines.push_back({std::string("natural gradient: ") + ex.what(), std::numeric_limits<double>::infinity(), 1e-6});
  }

  const Eigen::VectorXd v_iter = evaluate_policy_iterative(mdp, pi);
  const Eigen::VectorXd v_lin = evaluate_policy_linear(mdp, pi);
  lines.push_back({"iterated Bellman backup vs linear solve", (v_iter - v_lin).cwiseAbs().maxCoeff(), 1e-9});
  lines.push_back({"linear solution is a Bellman fixed point",
                   (sas_bellman_backup(mdp, pi, v_lin) - v_lin).cwiseAbs().maxCoeff(), 1e-9});
  return lines;
}

}  // namespace sas
