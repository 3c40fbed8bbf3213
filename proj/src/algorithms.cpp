#include "sas/algorithms.hpp"

#include "sas/envs.hpp"

#include <cmath>
#include <limits>

namespace sas {

std::size_t greedy_action(const Eigen::VectorXd& q_values, const ActionSet& available) {
  if (static_cast<std::size_t>(q_values.size()) != available.size())
    throw ContractViolation("greedy_action: size mismatch");
  std::size_t best = available.size();
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < available.size(); ++a) {
    if (!available.contains(a)) continue;
    const double v = q_values(static_cast<Eigen::Index>(a));
    if (best == available.size() || v > best_value) {
      best = a;
      best_value = v;
    }
  }
  if (best == available.size()) throw ContractViolation("greedy_action: empty action set");
  return best;
}

std::size_t epsilon_greedy(const Eigen::VectorXd& q_values, const ActionSet& available,
                           double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw ContractViolation("epsilon_greedy: epsilon must lie in [0,1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    const auto choices = available.indices();
    return choices[rng.index(choices.size())];
  }
  return greedy_action(q_values, available);
}

// --- SAS-Q -----------------------------------------------------------------

void QLearnerConfig::validate() const {
  if (!(eta > 0.0)) throw ContractViolation("QLearnerConfig: eta must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("QLearnerConfig: epsilon not in [0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("QLearnerConfig: gamma not in [0,1]");
  if (batch_size == 0) throw ContractViolation("QLearnerConfig: batch_size must be positive");
}

SasQLearner::SasQLearner(Eigen::VectorXd weights, std::size_t num_actions,
                         StateActionFeatures features, QLearnerConfig config)
    : w_(std::move(weights)), num_actions_(num_actions), features_(std::move(features)),
      config_(config) {
  config_.validate();
  if (num_actions_ == 0) throw ContractViolation("SasQLearner: no actions");
}

SasQLearner SasQLearner::linear(FeatureMap features, std::size_t num_actions,
                                QLearnerConfig config) {
  const auto d = static_cast<Eigen::Index>(features.dim());
  auto x = [features = std::move(features), num_actions, d](const State& s, std::size_t a) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d * static_cast<Eigen::Index>(num_actions));
    out.segment(static_cast<Eigen::Index>(a) * d, d) = features.featurize(s);
    return out;
  };
  return SasQLearner(Eigen::VectorXd::Zero(d * static_cast<Eigen::Index>(num_actions)),
                     num_actions, std::move(x), config);
}

SasQLearner SasQLearner::counterexample(Eigen::Vector2d theta, QLearnerConfig config) {
  auto x = [](const State& s, std::size_t a) {
    const SlotFeature f = counterexample_features(state_id(s), a);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2);
    out(static_cast<Eigen::Index>(f.slot)) = f.multiplier;
    return out;
  };
  return SasQLearner(theta, 2, std::move(x), config);
}

double SasQLearner::q(const State& state, std::size_t action) const {
  return w_.dot(features_(state, action));
}

Eigen::VectorXd SasQLearner::q_values(const State& state) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_actions_));
  for (std::size_t a = 0; a < num_actions_; ++a) out(static_cast<Eigen::Index>(a)) = q(state, a);
  return out;
}

double SasQLearner::td_target(const Transition& transition, const ActionSet* next_available) const {
  if (transition.done) return transition.reward;
  if (next_available == nullptr)
    throw ContractViolation("sas_q_step: non-terminal transition needs the next action set");
  const Eigen::VectorXd next_q = q_values(transition.next_state);
  const std::size_t best = greedy_action(next_q, *next_available);
  return transition.reward + config_.gamma * next_q(static_cast<Eigen::Index>(best));
}

Eigen::VectorXd SasQLearner::step_direction(const Transition& transition,
                                            const ActionSet* next_available) const {
  const Eigen::VectorXd x = features_(transition.state, transition.action);
  const double error = td_target(transition, next_available) - w_.dot(x);
  return error * x;
}

void SasQLearner::sas_q_step(const Transition& transition, const ActionSet* next_available) {
  w_ += config_.eta * step_direction(transition, next_available);
}

std::size_t SasQLearner::act(const State& state, const ActionSet& available, Rng& rng) const {
  return epsilon_greedy(q_values(state), available, config_.epsilon, rng);
}

Trajectory SasQLearner::run_episode(const Environment& env, Rng& rng) {
  const std::size_t horizon = env.spec().horizon;
  Trajectory traj;
  State s = env.reset(rng);
  ActionSet available = env.sample_action_set(s, rng);
  Eigen::VectorXd pending = Eigen::VectorXd::Zero(w_.size());
  std::size_t in_batch = 0;
  auto flush = [&] {
    if (in_batch == 0) return;
    w_ += config_.eta * pending / static_cast<double>(in_batch);
    pending.setZero();
    in_batch = 0;
  };
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = act(s, available, rng);
    StepResult out = env.step(s, a, t, rng);
    Transition tr{s, available, a, out.reward, out.next_state, out.done};
    std::optional<ActionSet> next;
    if (!out.done) next = env.sample_action_set(out.next_state, rng);
    pending += step_direction(tr, next ? &*next : nullptr);
    if (++in_batch == config_.batch_size) flush();
    traj.transitions.push_back(std::move(tr));
    if (out.done) break;
    s = std::move(out.next_state);
    available = std::move(*next);
  }
  flush();
  std::vector<double> rewards;
  for (const auto& tr : traj.transitions) rewards.push_back(tr.reward);
  traj.returns = discounted_return(rewards, env.spec().gamma);
  return traj;
}

// --- SAS-PG ----------------------------------------------------------------

SasPgLearner::SasPgLearner(MaskedSoftmaxPolicy policy, PgConfig config)
    : policy_(std::move(policy)),
      value_(policy_.feature_dim()),
      q_(policy_.feature_dim(), policy_.num_actions()),
      config_(config) {
  if (!(config_.eta_theta > 0.0 && config_.eta_v > 0.0 && config_.eta_q > 0.0))
    throw ContractViolation("PgConfig: learning rates must be positive");
}

PgEpisodeReport SasPgLearner::sas_pg_episode(const Trajectory& trajectory) {
  if (trajectory.returns.size() != trajectory.transitions.size())
    throw ContractViolation("sas_pg_episode: trajectory returns not populated");
  return config_.per_step ? per_step_update(trajectory) : batch_update(trajectory);
}

PgEpisodeReport SasPgLearner::batch_update(const Trajectory& trajectory) {
  PgEpisodeReport report;
  report.direction = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy_.num_params()));
  VarianceStats stats;
  struct StepCache {
    Eigen::VectorXd phi;
    Eigen::VectorXd probs;
  };
  std::vector<StepCache> cache;
  cache.reserve(trajectory.size());

  // Actor direction and variance statistics use the estimators as they
  // stood before this batch.
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory.transitions[t];
    const double g = trajectory.returns[t];
    Eigen::VectorXd phi = policy_.features().featurize(tr.state);
    Eigen::VectorXd probs = policy_.action_probabilities(phi, tr.action_set);
    const Eigen::VectorXd psi = policy_.log_prob_grad_from(phi, probs, tr.action_set, tr.action);
    const double v = value_.value(phi);
    const double qbar = q_.q_bar(phi, probs, tr.action_set);
    report.direction += (g + lambda_.lambda1() * v + lambda_.lambda2() * qbar) * psi;
    const double target = config_.lambda_target == LambdaTarget::sampled_return
                              ? g
                              : q_.q_values(phi)(static_cast<Eigen::Index>(tr.action));
    stats.accumulate(psi, v, qbar, target);
    cache.push_back({std::move(phi), std::move(probs)});
  }
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const double g = trajectory.returns[t];
    value_.update(cache[t].phi, g, config_.eta_v);
    q_.update(cache[t].phi, cache[t].probs, trajectory.transitions[t].action_set, g, config_.eta_q);
  }
  policy_.add_flat(config_.eta_theta * report.direction);
  update_lambda(stats, report);
  return report;
}

PgEpisodeReport SasPgLearner::per_step_update(const Trajectory& trajectory) {
  PgEpisodeReport report;
  report.direction = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy_.num_params()));
  VarianceStats stats;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory.transitions[t];
    const double g = trajectory.returns[t];
    const Eigen::VectorXd phi = policy_.features().featurize(tr.state);
    const Eigen::VectorXd probs = policy_.action_probabilities(phi, tr.action_set);
    const Eigen::VectorXd psi = policy_.log_prob_grad_from(phi, probs, tr.action_set, tr.action);
    const double v = value_.value(phi);
    const double qbar = q_.q_bar(phi, probs, tr.action_set);
    const double target = config_.lambda_target == LambdaTarget::sampled_return
                              ? g
                              : q_.q_values(phi)(static_cast<Eigen::Index>(tr.action));
    stats.accumulate(psi, v, qbar, target);
    const Eigen::VectorXd step = (g + lambda_.lambda1() * v + lambda_.lambda2() * qbar) * psi;
    report.direction += step;
    value_.update(phi, g, config_.eta_v);
    q_.update(phi, probs, tr.action_set, g, config_.eta_q);
    policy_.add_flat(config_.eta_theta * step);
  }
  update_lambda(stats, report);
  return report;
}

void SasPgLearner::update_lambda(const VarianceStats& stats, PgEpisodeReport& report) {
  if (config_.adapt_lambda && stats.count() > 0) {
    try {
      const Eigen::Vector2d a_hat = solve_lambda(stats, config_.ridge);
      report.a_hat = a_hat;
      lambda_ = polyak_update(lambda_, a_hat, config_.eta_lambda);
    } catch (const NumericalError&) {
      // Degenerate batch; keep the previous weights.
    }
  }
  report.lambda = lambda_;
}

// --- SAS-NPG ---------------------------------------------------------------

SasNpgLearner::SasNpgLearner(MaskedSoftmaxPolicy policy, NpgConfig config)
    : policy_(std::move(policy)),
      w_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy_.num_params()))),
      config_(config) {
  if (!(config_.eta_theta > 0.0 && config_.eta_w > 0.0))
    throw ContractViolation("NpgConfig: learning rates must be positive");
}

void SasNpgLearner::set_w(Eigen::VectorXd w) {
  if (w.size() != w_.size() || !w.allFinite()) throw ContractViolation("set_w: bad weights");
  w_ = std::move(w);
}

NpgEpisodeReport SasNpgLearner::sas_npg_episode(const Trajectory& trajectory) {
  if (trajectory.returns.size() != trajectory.transitions.size())
    throw ContractViolation("sas_npg_episode: trajectory returns not populated");
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory.transitions[t];
    const Eigen::VectorXd psi = policy_.log_prob_grad(tr.state, tr.action_set, tr.action);
    w_ += config_.eta_w * (trajectory.returns[t] - psi.dot(w_)) * psi;
  }
  NpgEpisodeReport report;
  const double norm = w_.norm();
  if (norm >= 1e-12) {
    policy_.add_flat(config_.eta_theta * w_ / norm);
    report.theta_updated = true;
  }
  report.w = w_;
  return report;
}

}  // namespace sas
