#include "sas/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace sas {

namespace {

std::size_t sample_categorical(const Eigen::VectorXd& weights, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) <= 0.0) continue;
    last = static_cast<std::size_t>(i);
    cumulative += weights(i);
    if (u < cumulative) return last;
  }
  return last;
}

}  // namespace

// --- counter-example -------------------------------------------------------

CounterexampleEnv::CounterexampleEnv(double availability_prob, std::size_t horizon) {
  spec_.num_base_actions = 2;
  spec_.gamma = 1.0;
  spec_.horizon = horizon;
  spec_.availability_prob = availability_prob;
}

State CounterexampleEnv::reset(Rng&) const { return StateId{kLeft}; }

StepResult CounterexampleEnv::step(const State& state, std::size_t action, std::size_t,
                                   Rng&) const {
  const StateId s = state_id(state);
  if (s > kRight || action > kRightAction)
    throw ContractViolation("CounterexampleEnv: state or action out of range");
  return StepResult{action == kLeftAction ? kLeft : kRight, 0.0, false};
}

SlotFeature counterexample_features(StateId state, std::size_t action) {
  if (state > CounterexampleEnv::kRight || action > CounterexampleEnv::kRightAction)
    throw ContractViolation("counterexample_features: state or action out of range");
  return SlotFeature{action, state == CounterexampleEnv::kLeft ? 1.0 : 2.0};
}

// --- tabular ---------------------------------------------------------------

void TabularSasMdp::validate() const {
  const auto S = static_cast<Eigen::Index>(num_states);
  const auto A = static_cast<Eigen::Index>(num_actions);
  if (num_states == 0 || num_actions == 0) throw ContractViolation("TabularSasMdp: empty");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("TabularSasMdp: gamma not in [0,1)");
  if (transition.size() != num_actions) throw ContractViolation("TabularSasMdp: transition count");
  if (reward.rows() != S || reward.cols() != A) throw ContractViolation("TabularSasMdp: reward shape");
  if (start.size() != S || std::abs(start.sum() - 1.0) > 1e-12 || start.minCoeff() < 0.0)
    throw ContractViolation("TabularSasMdp: start distribution");
  if (availability.size() != num_states || terminal.size() != num_states)
    throw ContractViolation("TabularSasMdp: per-state tables");
  for (const auto& p : transition) {
    if (p.rows() != S || p.cols() != S) throw ContractViolation("TabularSasMdp: transition shape");
    if (p.minCoeff() < 0.0) throw ContractViolation("TabularSasMdp: negative transition probability");
    for (Eigen::Index s = 0; s < S; ++s) {
      if (std::abs(p.row(s).sum() - 1.0) > 1e-12)
        throw ContractViolation("TabularSasMdp: transition row does not sum to 1");
    }
  }
  for (std::size_t s = 0; s < num_states; ++s) {
    if (terminal[s]) {
      if (!availability[s].empty())
        throw ContractViolation("TabularSasMdp: terminal state with availability");
      continue;
    }
    double total = 0.0;
    for (const auto& o : availability[s]) {
      if (o.actions.size() != num_actions || o.actions.count() == 0)
        throw ContractViolation("TabularSasMdp: bad action set");
      total += o.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ContractViolation("TabularSasMdp: availability does not sum to 1");
  }
}

double TabularSasMdp::reward_bound() const { return reward.cwiseAbs().maxCoeff(); }

TabularSasMdp make_random_tabular_mdp(std::size_t num_states, std::size_t num_actions,
                                      double gamma, std::uint64_t seed,
                                      std::size_t successors) {
  if (num_actions > 16) throw ContractViolation("make_random_tabular_mdp: too many actions");
  Rng rng(seed);
  TabularSasMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.gamma = gamma;
  const auto S = static_cast<Eigen::Index>(num_states);
  const auto A = static_cast<Eigen::Index>(num_actions);
  const std::size_t fanout = std::clamp<std::size_t>(successors, 1, num_states);

  mdp.transition.assign(num_actions, Eigen::MatrixXd::Zero(S, S));
  for (std::size_t a = 0; a < num_actions; ++a) {
    for (Eigen::Index s = 0; s < S; ++s) {
      std::vector<std::size_t> order(num_states);
      for (std::size_t i = 0; i < num_states; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng.engine());
      double total = 0.0;
      for (std::size_t k = 0; k < fanout; ++k) {
        const double w = rng.uniform(0.1, 1.0);
        mdp.transition[a](s, static_cast<Eigen::Index>(order[k])) = w;
        total += w;
      }
      mdp.transition[a].row(s) /= total;
    }
  }
  mdp.reward.resize(S, A);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
  mdp.start.resize(S);
  for (Eigen::Index s = 0; s < S; ++s) mdp.start(s) = rng.uniform(0.1, 1.0);
  mdp.start /= mdp.start.sum();

  const std::uint64_t num_sets = (std::uint64_t{1} << num_actions) - 1;
  mdp.availability.resize(num_states);
  for (std::size_t s = 0; s < num_states; ++s) {
    double total = 0.0;
    for (std::uint64_t bits = 1; bits <= num_sets; ++bits) {
      const double w = rng.uniform(0.1, 1.0);
      mdp.availability[s].push_back({ActionSet::from_bits(num_actions, bits), w});
      total += w;
    }
    for (auto& o : mdp.availability[s]) o.prob /= total;
  }
  mdp.terminal.assign(num_states, false);
  mdp.validate();
  return mdp;
}

TabularToyEnv::TabularToyEnv(TabularSasMdp mdp, std::size_t horizon) : mdp_(std::move(mdp)) {
  mdp_.validate();
  spec_.num_base_actions = mdp_.num_actions;
  spec_.gamma = mdp_.gamma;
  spec_.horizon = horizon;
  spec_.availability_prob = 1.0;
  spec_.validate();
}

State TabularToyEnv::reset(Rng& rng) const { return StateId{sample_categorical(mdp_.start, rng)}; }

ActionSet TabularToyEnv::support(const State& state) const {
  const StateId s = state_id(state);
  std::vector<bool> mask(mdp_.num_actions, false);
  for (const auto& o : mdp_.availability.at(s))
    for (std::size_t a = 0; a < mdp_.num_actions; ++a) mask[a] = mask[a] || o.actions.contains(a);
  return ActionSet(std::move(mask));
}

ActionSet TabularToyEnv::sample_action_set(const State& state, Rng& rng) const {
  const auto& outcomes = mdp_.availability.at(state_id(state));
  if (outcomes.empty()) throw ContractViolation("TabularToyEnv: no actions in terminal state");
  Eigen::VectorXd probs(static_cast<Eigen::Index>(outcomes.size()));
  for (std::size_t i = 0; i < outcomes.size(); ++i) probs(static_cast<Eigen::Index>(i)) = outcomes[i].prob;
  return outcomes[sample_categorical(probs, rng)].actions;
}

StepResult TabularToyEnv::step(const State& state, std::size_t action, std::size_t,
                               Rng& rng) const {
  const StateId s = state_id(state);
  if (s >= mdp_.num_states || action >= mdp_.num_actions)
    throw ContractViolation("TabularToyEnv: state or action out of range");
  const Eigen::VectorXd row = mdp_.transition[action].row(static_cast<Eigen::Index>(s)).transpose();
  const std::size_t next = sample_categorical(row, rng);
  return StepResult{StateId{next}, mdp_.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(action)),
                    static_cast<bool>(mdp_.terminal[next])};
}

// --- routing ---------------------------------------------------------------

bool strongly_connected(const std::vector<std::vector<std::size_t>>& out_edges) {
  const std::size_t n = out_edges.size();
  if (n == 0) return false;
  auto reaches_all = [n](const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t visited = 1;
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : adj[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        ++visited;
        frontier.push(v);
      }
    }
    return visited == n;
  };
  std::vector<std::vector<std::size_t>> reversed(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v : out_edges[u]) reversed[v].push_back(u);
  return reaches_all(out_edges) && reaches_all(reversed);
}

RoutingGraphEnv make_routing_env(const RoutingConfig& config) {
  if (config.num_nodes < 2) throw ContractViolation("make_routing_env: need at least two nodes");
  if (!(config.edge_density > 0.0 && config.edge_density <= 1.0))
    throw ContractViolation("make_routing_env: edge_density must lie in (0,1]");
  Rng rng(config.seed);
  const std::size_t n = config.num_nodes;
  for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (u != v && rng.bernoulli(config.edge_density)) out[u].push_back(v);
    if (!strongly_connected(out)) continue;
    const std::size_t goal = rng.index(n);
    return RoutingGraphEnv(config, std::move(out), goal);
  }
  throw std::runtime_error("make_routing_env: no strongly connected graph after " +
                           std::to_string(config.max_attempts) + " attempts; raise edge_density");
}

RoutingGraphEnv::RoutingGraphEnv(RoutingConfig config,
                                 std::vector<std::vector<std::size_t>> out_edges,
                                 std::size_t goal)
    : config_(std::move(config)), out_edges_(std::move(out_edges)), goal_(goal) {
  if (out_edges_.size() != config_.num_nodes || goal_ >= config_.num_nodes)
    throw ContractViolation("RoutingGraphEnv: inconsistent graph");
  if (!strongly_connected(out_edges_))
    throw ContractViolation("RoutingGraphEnv: graph must be strongly connected");
  for (auto& edges : out_edges_) std::sort(edges.begin(), edges.end());
  spec_.num_base_actions = config_.num_nodes;
  spec_.gamma = config_.gamma;
  spec_.horizon = config_.horizon;
  spec_.availability_prob = config_.availability_prob;
  spec_.validate();
}

State RoutingGraphEnv::reset(Rng& rng) const {
  std::size_t s = rng.index(config_.num_nodes - 1);
  if (s >= goal_) ++s;
  return StateId{s};
}

ActionSet RoutingGraphEnv::support(const State& state) const {
  return ActionSet::from_indices(config_.num_nodes, out_edges_.at(state_id(state)));
}

StepResult RoutingGraphEnv::step(const State& state, std::size_t action, std::size_t,
                                 Rng&) const {
  const StateId s = state_id(state);
  const auto& edges = out_edges_.at(s);
  if (!std::binary_search(edges.begin(), edges.end(), action))
    throw ContractViolation("RoutingGraphEnv: no edge for this action");
  if (action == goal_) return StepResult{StateId{action}, config_.goal_reward, true};
  return StepResult{StateId{action}, config_.step_penalty, false};
}

double RoutingGraphEnv::reward_bound() const {
  return std::max(std::abs(config_.goal_reward), std::abs(config_.step_penalty));
}

TabularSasMdp RoutingGraphEnv::to_tabular() const {
  const std::size_t n = config_.num_nodes;
  const auto N = static_cast<Eigen::Index>(n);
  const double p = config_.availability_prob;
  TabularSasMdp mdp;
  mdp.num_states = n;
  mdp.num_actions = n;
  mdp.gamma = config_.gamma;
  mdp.transition.assign(n, Eigen::MatrixXd::Zero(N, N));
  mdp.reward = Eigen::MatrixXd::Zero(N, N);
  mdp.start = Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(n - 1));
  mdp.start(static_cast<Eigen::Index>(goal_)) = 0.0;
  mdp.availability.resize(n);
  mdp.terminal.assign(n, false);
  mdp.terminal[goal_] = true;
  for (std::size_t s = 0; s < n; ++s) {
    const auto S = static_cast<Eigen::Index>(s);
    for (std::size_t a = 0; a < n; ++a) mdp.transition[a](S, S) = 1.0;
    if (s == goal_) continue;
    const auto& edges = out_edges_[s];
    for (std::size_t v : edges) {
      const auto V = static_cast<Eigen::Index>(v);
      mdp.transition[v](S, S) = 0.0;
      mdp.transition[v](S, V) = 1.0;
      mdp.reward(S, V) = v == goal_ ? config_.goal_reward : config_.step_penalty;
    }
    const std::size_t k = edges.size();
    if (k > 20) throw ContractViolation("to_tabular: out-degree too large to enumerate");
    const double nonempty = 1.0 - std::pow(1.0 - p, static_cast<double>(k));
    for (std::uint64_t bits = 1; bits < (std::uint64_t{1} << k); ++bits) {
      std::vector<std::size_t> chosen;
      for (std::size_t i = 0; i < k; ++i)
        if ((bits >> i) & 1U) chosen.push_back(edges[i]);
      const double prob = std::pow(p, static_cast<double>(chosen.size())) *
                          std::pow(1.0 - p, static_cast<double>(k - chosen.size())) / nonempty;
      if (prob == 0.0) continue;
      mdp.availability[s].push_back({ActionSet::from_indices(n, chosen), prob});
    }
  }
  mdp.validate();
  return mdp;
}

// --- maze ------------------------------------------------------------------

bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  auto on_segment = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= c.y() && c.y() <= std::max(a.y(), b.y());
  };
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

MazeEnv::MazeEnv(MazeConfig config) : config_(std::move(config)) {
  if (config_.num_actuators == 0) throw ContractViolation("MazeEnv: no actuators");
  if (!(config_.step_size > 0.0)) throw ContractViolation("MazeEnv: step size must be positive");
  spec_.num_base_actions = config_.num_actuators;
  spec_.gamma = config_.gamma;
  spec_.horizon = config_.horizon;
  spec_.availability_prob = config_.availability_prob;
  spec_.validate();
}

bool MazeEnv::in_goal(const Eigen::Vector2d& p) const {
  return (p - config_.goal_center).norm() <= config_.goal_radius;
}

State MazeEnv::reset(Rng& rng) const {
  for (;;) {
    Eigen::Vector2d p(rng.uniform(), rng.uniform());
    if (!in_goal(p)) return StateVector(p);
  }
}

StepResult MazeEnv::step(const State& state, std::size_t action, std::size_t, Rng&) const {
  const auto& x = state_vector(state);
  if (x.size() != 2) throw ContractViolation("MazeEnv: state must be 2-D");
  if (action >= config_.num_actuators) throw ContractViolation("MazeEnv: action out of range");
  const double angle =
      2.0 * std::numbers::pi * static_cast<double>(action) / static_cast<double>(config_.num_actuators);
  const Eigen::Vector2d from = x;
  const Eigen::Vector2d to = from + config_.step_size * Eigen::Vector2d(std::cos(angle), std::sin(angle));
  bool blocked = to.x() < 0.0 || to.x() > 1.0 || to.y() < 0.0 || to.y() > 1.0;
  for (const auto& wall : config_.walls) {
    if (blocked) break;
    blocked = segments_intersect(from, to, wall.from, wall.to);
  }
  const Eigen::Vector2d next = blocked ? from : to;
  if (in_goal(next)) return StepResult{StateVector(next), config_.goal_reward, true};
  return StepResult{StateVector(next), config_.step_penalty, false};
}

double MazeEnv::reward_bound() const {
  return std::max(std::abs(config_.goal_reward), std::abs(config_.step_penalty));
}

// --- recommender -----------------------------------------------------------

RecommenderEnv::RecommenderEnv(RecommenderConfig config) : config_(std::move(config)) {
  if (config_.num_products == 0 || config_.context_dim == 0 || config_.episode_length == 0)
    throw ContractViolation("RecommenderEnv: sizes must be positive");
  spec_.num_base_actions = config_.num_products;
  spec_.gamma = config_.gamma;
  spec_.horizon = config_.episode_length;
  spec_.availability_prob = config_.availability_prob;
  spec_.validate();
  Rng rng(config_.seed);
  means_.resize(static_cast<Eigen::Index>(config_.num_products));
  for (Eigen::Index b = 0; b < means_.size(); ++b)
    means_(b) = rng.normal(config_.mean_of_means, config_.sd_of_means);
}

State RecommenderEnv::reset(Rng& rng) const {
  StateVector context(static_cast<Eigen::Index>(config_.context_dim));
  for (Eigen::Index i = 0; i < context.size(); ++i) context(i) = rng.uniform();
  return context;
}

StepResult RecommenderEnv::step(const State& state, std::size_t action, std::size_t t,
                                Rng& rng) const {
  if (action >= config_.num_products) throw ContractViolation("RecommenderEnv: action out of range");
  const double limit = 3.0 * config_.noise_sd;
  const double noise =
      config_.noise_sd > 0.0 ? std::clamp(rng.normal(0.0, config_.noise_sd), -limit, limit) : 0.0;
  const bool done = t + 1 >= config_.episode_length;
  return StepResult{state, means_(static_cast<Eigen::Index>(action)) + noise, done};
}

double RecommenderEnv::reward_bound() const {
  return means_.cwiseAbs().maxCoeff() + 3.0 * config_.noise_sd;
}

}  // namespace sas
