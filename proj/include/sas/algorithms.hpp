#ifndef SAS_ALGORITHMS_HPP
#define SAS_ALGORITHMS_HPP

#include <cstddef>
#include <functional>
#include <optional>

#include <Eigen/Core>

#include "sas/core.hpp"
#include "sas/estimators.hpp"
#include "sas/features.hpp"
#include "sas/policy.hpp"
#include "sas/variance.hpp"

namespace sas {

/// With probability epsilon a uniform draw over the available actions,
/// otherwise the available argmax (lowest index wins ties).
std::size_t epsilon_greedy(const Eigen::VectorXd& q_values, const ActionSet& available,
                           double epsilon, Rng& rng);

/// Lowest-index argmax of q over the available actions.
std::size_t greedy_action(const Eigen::VectorXd& q_values, const ActionSet& available);

// ---------------------------------------------------------------------------
// SAS-Q-learning

/// x(s, a) such that q(s, a) = w . x(s, a).
using StateActionFeatures = std::function<Eigen::VectorXd(const State&, std::size_t)>;

struct QLearnerConfig {
  double eta = 0.01;
  double epsilon = 0.1;
  double gamma = 0.99;
  /// Transitions per semi-gradient update; updates inside a batch are
  /// computed with the weights frozen at the start of the batch and averaged.
  std::size_t batch_size = 1;

  void validate() const;
};

class SasQLearner {
 public:
  SasQLearner(Eigen::VectorXd weights, std::size_t num_actions, StateActionFeatures features,
              QLearnerConfig config);

  /// One weight block per action over the state features.
  static SasQLearner linear(FeatureMap features, std::size_t num_actions, QLearnerConfig config);
  /// Paired-slot approximator of the two-state counter-example.
  static SasQLearner counterexample(Eigen::Vector2d theta, QLearnerConfig config);

  const Eigen::VectorXd& weights() const { return w_; }
  const QLearnerConfig& config() const { return config_; }
  std::size_t num_actions() const { return num_actions_; }

  double q(const State& state, std::size_t action) const;
  Eigen::VectorXd q_values(const State& state) const;

  /// R_t when the transition is terminal, otherwise
  /// R_t + gamma * max over next_available of q(S_{t+1}, .).
  double td_target(const Transition& transition, const ActionSet* next_available) const;
  /// Semi-gradient step w += eta * (target - q(s, a)) * x(s, a).
  void sas_q_step(const Transition& transition, const ActionSet* next_available);

  std::size_t act(const State& state, const ActionSet& available, Rng& rng) const;

  /// Runs one episode online, applying updates every batch_size steps.
  Trajectory run_episode(const Environment& env, Rng& rng);

 private:
  Eigen::VectorXd step_direction(const Transition& transition, const ActionSet* next_available) const;

  Eigen::VectorXd w_;
  std::size_t num_actions_;
  StateActionFeatures features_;
  QLearnerConfig config_;
};

// ---------------------------------------------------------------------------
// SAS policy gradient with adaptive baselines

/// Target used in C when solving for the baseline weights.
enum class LambdaTarget { sampled_return, q_hat };

struct PgConfig {
  double eta_theta = 1e-3;
  double eta_v = 1e-2;
  double eta_q = 1e-2;
  double eta_lambda = 0.999;
  double ridge = 1e-6;
  /// Apply the theta update after every step instead of once per episode.
  bool per_step = false;
  bool adapt_lambda = true;
  LambdaTarget lambda_target = LambdaTarget::sampled_return;
};

struct PgEpisodeReport {
  /// Sum over steps of (G + l1 v + l2 qbar) psi, before scaling by eta_theta.
  Eigen::VectorXd direction;
  std::optional<Eigen::Vector2d> a_hat;
  LambdaWeights lambda;
};

class SasPgLearner {
 public:
  SasPgLearner(MaskedSoftmaxPolicy policy, PgConfig config);

  const MaskedSoftmaxPolicy& policy() const { return policy_; }
  MaskedSoftmaxPolicy& policy() { return policy_; }
  const ValueEstimator& value() const { return value_; }
  const QEstimator& q() const { return q_; }
  const LambdaWeights& lambda() const { return lambda_; }
  void set_lambda(const LambdaWeights& lambda) { lambda_ = lambda; }
  const PgConfig& config() const { return config_; }

  std::size_t act(const State& state, const ActionSet& available, Rng& rng) const {
    return policy_.sample_action(state, available, rng);
  }

  /// One pass of the batch update over `trajectory` (returns populated):
  /// value and q estimators, the actor, then the baseline weights.
  PgEpisodeReport sas_pg_episode(const Trajectory& trajectory);

 private:
  PgEpisodeReport batch_update(const Trajectory& trajectory);
  PgEpisodeReport per_step_update(const Trajectory& trajectory);
  void update_lambda(const VarianceStats& stats, PgEpisodeReport& report);

  MaskedSoftmaxPolicy policy_;
  ValueEstimator value_;
  QEstimator q_;
  LambdaWeights lambda_;
  PgConfig config_;
};

// ---------------------------------------------------------------------------
// SAS natural policy gradient

struct NpgConfig {
  double eta_theta = 1e-2;
  double eta_w = 1e-2;
};

struct NpgEpisodeReport {
  Eigen::VectorXd w;
  bool theta_updated = false;
};

class SasNpgLearner {
 public:
  SasNpgLearner(MaskedSoftmaxPolicy policy, NpgConfig config);

  const MaskedSoftmaxPolicy& policy() const { return policy_; }
  MaskedSoftmaxPolicy& policy() { return policy_; }
  const Eigen::VectorXd& w() const { return w_; }
  void set_w(Eigen::VectorXd w);
  const NpgConfig& config() const { return config_; }

  std::size_t act(const State& state, const ActionSet& available, Rng& rng) const {
    return policy_.sample_action(state, available, rng);
  }

  /// w += eta_w (G - psi.w) psi for every step, then
  /// theta += eta_theta w / ||w|| (skipped when ||w|| < 1e-12).
  NpgEpisodeReport sas_npg_episode(const Trajectory& trajectory);

 private:
  MaskedSoftmaxPolicy policy_;
  Eigen::VectorXd w_;
  NpgConfig config_;
};

}  // namespace sas

#endif  // SAS_ALGORITHMS_HPP
