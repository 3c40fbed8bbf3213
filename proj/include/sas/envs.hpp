#ifndef SAS_ENVS_HPP
#define SAS_ENVS_HPP

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sas/core.hpp"

namespace sas {

// ---------------------------------------------------------------------------
// Two-state divergence counter-example.

/// Weight slot and multiplier for the paired-weight approximator
/// q(s, a) = multiplier(s) * theta[slot(a)].
struct SlotFeature {
  std::size_t slot = 0;
  double multiplier = 1.0;
};

/// States 0 (left, s1) and 1 (right, s2); actions 0 (left, a1) and
/// 1 (right, a2). Moving left lands in s1, moving right in s2. Rewards are
/// always zero and gamma is 1.
class CounterexampleEnv final : public Environment {
 public:
  static constexpr StateId kLeft = 0;
  static constexpr StateId kRight = 1;
  static constexpr std::size_t kLeftAction = 0;
  static constexpr std::size_t kRightAction = 1;

  explicit CounterexampleEnv(double availability_prob = 0.5, std::size_t horizon = 10);

  const SasMdpSpec& spec() const override { return spec_; }
  State reset(Rng& rng) const override;
  StepResult step(const State& state, std::size_t action, std::size_t t,
                  Rng& rng) const override;
  double reward_bound() const override { return 0.0; }

 private:
  SasMdpSpec spec_;
};

/// Slot = action index, multiplier 1 in s1 and 2 in s2.
SlotFeature counterexample_features(StateId state, std::size_t action);

// ---------------------------------------------------------------------------
// Explicit tabular SAS-MDPs.

struct AvailabilityOutcome {
  ActionSet actions;
  double prob = 0.0;
};

/// Fully tabulated SAS-MDP. transition[a](s, s') = P(s, a, s'),
/// reward(s, a) = R(s, a), availability[s] lists phi(s, .) over the
/// non-empty action sets that can occur in s. Terminal states are absorbing,
/// earn nothing and have an empty availability list.
struct TabularSasMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  double gamma = 0.9;
  std::vector<Eigen::MatrixXd> transition;
  Eigen::MatrixXd reward;
  Eigen::VectorXd start;
  std::vector<std::vector<AvailabilityOutcome>> availability;
  std::vector<bool> terminal;

  void validate() const;
  double reward_bound() const;
};

/// Random dense-ish tabular SAS-MDP for oracle checks. Each (s, a) reaches
/// `successors` distinct next states, phi(s, .) is a random distribution over
/// all non-empty subsets of B, rewards are uniform on [-1, 1].
TabularSasMdp make_random_tabular_mdp(std::size_t num_states, std::size_t num_actions,
                                      double gamma, std::uint64_t seed,
                                      std::size_t successors = 2);

/// Environment view over a TabularSasMdp.
class TabularToyEnv final : public Environment {
 public:
  TabularToyEnv(TabularSasMdp mdp, std::size_t horizon);

  const TabularSasMdp& mdp() const { return mdp_; }
  const SasMdpSpec& spec() const override { return spec_; }
  State reset(Rng& rng) const override;
  ActionSet support(const State& state) const override;
  ActionSet sample_action_set(const State& state, Rng& rng) const override;
  StepResult step(const State& state, std::size_t action, std::size_t t,
                  Rng& rng) const override;
  double reward_bound() const override { return mdp_.reward_bound(); }

 private:
  TabularSasMdp mdp_;
  SasMdpSpec spec_;
};

// ---------------------------------------------------------------------------
// Synthetic road network.

struct RoutingConfig {
  std::size_t num_nodes = 25;
  double edge_density = 0.15;
  double availability_prob = 0.8;
  double step_penalty = -1.0;
  double goal_reward = 100.0;
  double gamma = 0.99;
  std::size_t horizon = 100;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 1000;
};

/// Random strongly connected digraph. Base action b means "drive to node b";
/// only out-edges of the current node are ever available, each independently
/// with probability p. Entering the goal ends the episode with goal_reward;
/// every other move costs step_penalty. Episodes start uniformly at a
/// non-goal node.
class RoutingGraphEnv final : public Environment {
 public:
  RoutingGraphEnv(RoutingConfig config, std::vector<std::vector<std::size_t>> out_edges,
                  std::size_t goal);

  const RoutingConfig& config() const { return config_; }
  const std::vector<std::vector<std::size_t>>& out_edges() const { return out_edges_; }
  std::size_t goal() const { return goal_; }
  std::size_t num_nodes() const { return config_.num_nodes; }

  const SasMdpSpec& spec() const override { return spec_; }
  State reset(Rng& rng) const override;
  ActionSet support(const State& state) const override;
  StepResult step(const State& state, std::size_t action, std::size_t t,
                  Rng& rng) const override;
  double reward_bound() const override;

  /// Exact tabular form (phi enumerated over subsets of each node's out-edges).
  TabularSasMdp to_tabular() const;

 private:
  RoutingConfig config_;
  SasMdpSpec spec_;
  std::vector<std::vector<std::size_t>> out_edges_;
  std::size_t goal_;
};

/// Draws each ordered pair as an edge with probability edge_density and
/// retries until the graph is strongly connected. Throws std::runtime_error
/// after config.max_attempts failures.
RoutingGraphEnv make_routing_env(const RoutingConfig& config);

bool strongly_connected(const std::vector<std::vector<std::size_t>>& out_edges);

// ---------------------------------------------------------------------------
// Continuous maze.

struct WallSegment {
  Eigen::Vector2d from;
  Eigen::Vector2d to;
};

struct MazeConfig {
  std::size_t num_actuators = 16;
  double step_size = 0.05;
  double step_penalty = -0.05;
  double goal_reward = 100.0;
  Eigen::Vector2d goal_center{0.9, 0.9};
  double goal_radius = 0.1;
  std::vector<WallSegment> walls{{Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.5, 0.7)}};
  double availability_prob = 0.8;
  double gamma = 0.99;
  std::size_t horizon = 200;
};

/// Point agent in [0,1]^2 with actuators at equal angles (actuator k points
/// at angle 2*pi*k/n). A move that would cross a wall or leave the square
/// leaves the position unchanged; the step penalty still applies.
class MazeEnv final : public Environment {
 public:
  explicit MazeEnv(MazeConfig config);

  const MazeConfig& config() const { return config_; }
  const SasMdpSpec& spec() const override { return spec_; }
  State reset(Rng& rng) const override;
  StepResult step(const State& state, std::size_t action, std::size_t t,
                  Rng& rng) const override;
  double reward_bound() const override;

  bool in_goal(const Eigen::Vector2d& p) const;

 private:
  MazeConfig config_;
  SasMdpSpec spec_;
};

bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2);

// ---------------------------------------------------------------------------
// Synthetic recommender.

struct RecommenderConfig {
  std::size_t num_products = 100;
  std::size_t context_dim = 10;
  double mean_of_means = 1.0;
  double sd_of_means = 1.0;
  double noise_sd = 0.1;
  std::size_t episode_length = 5;
  double availability_prob = 0.8;
  double gamma = 0.99;
  std::uint64_t seed = 1;
};

/// A random user context in [0,1]^k is drawn per episode and held fixed.
/// Recommending product b pays mean_b plus Gaussian noise clipped to
/// +/- 3 noise_sd. Episodes last exactly episode_length steps.
class RecommenderEnv final : public Environment {
 public:
  explicit RecommenderEnv(RecommenderConfig config);

  const RecommenderConfig& config() const { return config_; }
  const Eigen::VectorXd& product_means() const { return means_; }

  const SasMdpSpec& spec() const override { return spec_; }
  State reset(Rng& rng) const override;
  StepResult step(const State& state, std::size_t action, std::size_t t,
                  Rng& rng) const override;
  double reward_bound() const override;

 private:
  RecommenderConfig config_;
  SasMdpSpec spec_;
  Eigen::VectorXd means_;
};

}  // namespace sas

#endif  // SAS_ENVS_HPP
