#include "sas/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace sas {

namespace {

/// pi(s, alpha_k, .) for every non-terminal state and listed action set.
struct ProbabilityTable {
  std::vector<std::vector<Eigen::VectorXd>> probs;

  ProbabilityTable(const TabularSasMdp& mdp, const TabularPolicy& policy) {
    probs.resize(mdp.num_states);
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      for (const auto& outcome : mdp.availability[s]) {
        Eigen::VectorXd p = policy(s, outcome.actions);
        if (static_cast<std::size_t>(p.size()) != mdp.num_actions)
          throw ContractViolation("oracle: policy returned the wrong number of probabilities");
        probs[s].push_back(std::move(p));
      }
    }
  }
};

/// Probabilities plus score vectors psi(s, alpha_k, a) for a masked softmax.
struct ScoreTable {
  std::vector<std::vector<Eigen::VectorXd>> probs;
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> psi;
  std::vector<Eigen::VectorXd> phi;

  ScoreTable(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy) {
    if (policy.num_actions() != mdp.num_actions)
      throw ContractViolation("oracle: policy and mdp disagree on |B|");
    probs.resize(mdp.num_states);
    psi.resize(mdp.num_states);
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      phi.push_back(policy.features().featurize(StateId{s}));
      for (const auto& outcome : mdp.availability[s]) {
        Eigen::VectorXd p = policy.action_probabilities(phi.back(), outcome.actions);
        std::vector<Eigen::VectorXd> grads(mdp.num_actions);
        for (std::size_t a = 0; a < mdp.num_actions; ++a) {
          grads[a] = outcome.actions.contains(a)
                         ? policy.log_prob_grad_from(phi.back(), p, outcome.actions, a)
                         : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.num_params()));
        }
        probs[s].push_back(std::move(p));
        psi[s].push_back(std::move(grads));
      }
    }
  }
};

void check_horizon(std::size_t horizon) {
  if (horizon == 0) throw ContractViolation("oracle: horizon must be positive");
}

/// Expected one-step reward and transition matrix under the policy.
void policy_model(const TabularSasMdp& mdp, const ProbabilityTable& table, Eigen::VectorXd& r_pi,
                  Eigen::MatrixXd& p_pi) {
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  r_pi = Eigen::VectorXd::Zero(S);
  p_pi = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    const auto row = static_cast<Eigen::Index>(s);
    for (std::size_t k = 0; k < mdp.availability[s].size(); ++k) {
      const auto& outcome = mdp.availability[s][k];
      for (std::size_t a : outcome.actions.indices()) {
        const double w = outcome.prob * table.probs[s][k](static_cast<Eigen::Index>(a));
        if (w == 0.0) continue;
        r_pi(row) += w * mdp.reward(row, static_cast<Eigen::Index>(a));
        p_pi.row(row) += w * mdp.transition[a].row(row);
      }
    }
  }
}

/// Enumeration core shared by the public visitors. `visit(path, prob)` is
/// called once per maximal trajectory.
template <class Visit>
void enumerate(const TabularSasMdp& mdp, const std::vector<std::vector<Eigen::VectorXd>>& probs,
               std::size_t horizon, Visit&& visit) {
  std::vector<EnumeratedStep> path;
  path.reserve(horizon);
  auto dfs = [&](auto&& self, std::size_t t, std::size_t s, double prob) -> void {
    if (t == horizon || mdp.terminal[s]) {
      visit(std::span<const EnumeratedStep>(path), prob);
      return;
    }
    const auto row = static_cast<Eigen::Index>(s);
    for (std::size_t k = 0; k < mdp.availability[s].size(); ++k) {
      const auto& outcome = mdp.availability[s][k];
      for (std::size_t a = 0; a < mdp.num_actions; ++a) {
        if (!outcome.actions.contains(a)) continue;
        const double pa = prob * outcome.prob * probs[s][k](static_cast<Eigen::Index>(a));
        if (pa == 0.0) continue;
        path.push_back({s, k, a});
        if (t + 1 == horizon) {
          visit(std::span<const EnumeratedStep>(path), pa);
        } else {
          const auto& p_row = mdp.transition[a];
          for (Eigen::Index next = 0; next < p_row.cols(); ++next) {
            const double pn = p_row(row, next);
            if (pn == 0.0) continue;
            self(self, t + 1, static_cast<std::size_t>(next), pa * pn);
          }
        }
        path.pop_back();
      }
    }
  };
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    const double p0 = mdp.start(static_cast<Eigen::Index>(s));
    if (p0 == 0.0) continue;
    dfs(dfs, 0, s, p0);
  }
}

}  // namespace

TabularPolicy as_tabular_policy(const MaskedSoftmaxPolicy& policy) {
  return [&policy](StateId s, const ActionSet& available) {
    return policy.action_probabilities(State{s}, available);
  };
}

// --- Bellman operators -----------------------------------------------------

Eigen::VectorXd sas_bellman_backup(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                   const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != mdp.num_states)
    throw ContractViolation("sas_bellman_backup: value size mismatch");
  const ProbabilityTable table(mdp, policy);
  Eigen::VectorXd r_pi;
  Eigen::MatrixXd p_pi;
  policy_model(mdp, table, r_pi, p_pi);
  return r_pi + mdp.gamma * p_pi * v;
}

Eigen::VectorXd sas_optimality_backup(const TabularSasMdp& mdp, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != mdp.num_states)
    throw ContractViolation("sas_optimality_backup: value size mismatch");
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  const auto A = static_cast<Eigen::Index>(mdp.num_actions);
  Eigen::MatrixXd lookahead(S, A);
  for (Eigen::Index a = 0; a < A; ++a)
    lookahead.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[static_cast<std::size_t>(a)] * v;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(S);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    double total = 0.0;
    for (const auto& outcome : mdp.availability[s]) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a : outcome.actions.indices())
        best = std::max(best, lookahead(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)));
      total += outcome.prob * best;
    }
    out(static_cast<Eigen::Index>(s)) = total;
  }
  return out;
}

Eigen::VectorXd evaluate_policy_iterative(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                          double tol, std::size_t max_iterations) {
  const ProbabilityTable table(mdp, policy);
  Eigen::VectorXd r_pi;
  Eigen::MatrixXd p_pi;
  policy_model(mdp, table, r_pi, p_pi);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states));
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = r_pi + mdp.gamma * p_pi * v;
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (change < tol) return v;
  }
  throw NumericalError("evaluate_policy_iterative: did not converge");
}

Eigen::VectorXd evaluate_policy_linear(const TabularSasMdp& mdp, const TabularPolicy& policy) {
  const ProbabilityTable table(mdp, policy);
  Eigen::VectorXd r_pi;
  Eigen::MatrixXd p_pi;
  policy_model(mdp, table, r_pi, p_pi);
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_pi;
  return system.partialPivLu().solve(r_pi);
}

double policy_value(const TabularSasMdp& mdp, const TabularPolicy& policy) {
  return mdp.start.dot(evaluate_policy_linear(mdp, policy));
}

std::size_t DecisionListPolicy::act(StateId state, const ActionSet& available) const {
  for (std::size_t a : ranking.at(state))
    if (available.contains(a)) return a;
  throw ContractViolation("DecisionListPolicy: no ranked action is available");
}

TabularPolicy DecisionListPolicy::as_policy() const {
  return [this](StateId s, const ActionSet& available) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(available.size()));
    out(static_cast<Eigen::Index>(act(s, available))) = 1.0;
    return out;
  };
}

ValueIterationResult sas_value_iteration(const TabularSasMdp& mdp, double tol,
                                         std::size_t max_iterations) {
  mdp.validate();
  ValueIterationResult result;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_states));
  bool converged = false;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = sas_optimality_backup(mdp, v);
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    result.iterations = it + 1;
    if (change < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("sas_value_iteration: iteration cap reached");

  result.values = v;
  result.policy.ranking.resize(mdp.num_states);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    std::vector<double> lookahead(mdp.num_actions);
    for (std::size_t a = 0; a < mdp.num_actions; ++a)
      lookahead[a] = mdp.reward(row, static_cast<Eigen::Index>(a)) +
                     mdp.gamma * mdp.transition[a].row(row).dot(v);
    auto& order = result.policy.ranking[s];
    order.resize(mdp.num_actions);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return lookahead[x] > lookahead[y]; });
  }
  return result;
}

// --- finite horizon --------------------------------------------------------

std::vector<Eigen::VectorXd> state_occupancy(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                             std::size_t horizon) {
  check_horizon(horizon);
  const ProbabilityTable table(mdp, policy);
  Eigen::VectorXd r_pi;
  Eigen::MatrixXd p_pi;
  policy_model(mdp, table, r_pi, p_pi);
  std::vector<Eigen::VectorXd> occupancy;
  occupancy.reserve(horizon);
  Eigen::VectorXd dist = mdp.start;
  for (std::size_t t = 0; t < horizon; ++t) {
    occupancy.push_back(dist);
    dist = p_pi.transpose() * dist;
  }
  return occupancy;
}

std::vector<Eigen::MatrixXd> finite_horizon_q(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                              std::size_t horizon) {
  const ProbabilityTable table(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  const auto A = static_cast<Eigen::Index>(mdp.num_actions);
  std::vector<Eigen::MatrixXd> q;
  q.reserve(horizon + 1);
  q.push_back(Eigen::MatrixXd::Zero(S, A));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  for (std::size_t k = 1; k <= horizon; ++k) {
    Eigen::MatrixXd qk(S, A);
    for (Eigen::Index a = 0; a < A; ++a)
      qk.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[static_cast<std::size_t>(a)] * v;
    for (std::size_t s = 0; s < mdp.num_states; ++s)
      if (mdp.terminal[s]) qk.row(static_cast<Eigen::Index>(s)).setZero();
    Eigen::VectorXd next_v = Eigen::VectorXd::Zero(S);
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      for (std::size_t i = 0; i < mdp.availability[s].size(); ++i) {
        const auto& outcome = mdp.availability[s][i];
        next_v(static_cast<Eigen::Index>(s)) +=
            outcome.prob * table.probs[s][i].dot(qk.row(static_cast<Eigen::Index>(s)).transpose());
      }
    }
    v = std::move(next_v);
    q.push_back(std::move(qk));
  }
  return q;
}

ExactReturn exact_J(const TabularSasMdp& mdp, const TabularPolicy& policy, std::size_t horizon) {
  check_horizon(horizon);
  const ProbabilityTable table(mdp, policy);
  Eigen::VectorXd r_pi;
  Eigen::MatrixXd p_pi;
  policy_model(mdp, table, r_pi, p_pi);
  ExactReturn out;
  Eigen::VectorXd dist = mdp.start;
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    out.value += discount * dist.dot(r_pi);
    dist = p_pi.transpose() * dist;
    discount *= mdp.gamma;
  }
  out.truncation_bound = discount * mdp.reward_bound() / (1.0 - mdp.gamma);
  return out;
}

Eigen::VectorXd exact_grad_J(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                             std::size_t horizon) {
  check_horizon(horizon);
  const ScoreTable scores(mdp, policy);
  const TabularPolicy pi = as_tabular_policy(policy);
  const auto occupancy = state_occupancy(mdp, pi, horizon);
  const auto q = finite_horizon_q(mdp, pi, horizon);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.num_params()));
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Eigen::MatrixXd& q_remaining = q[horizon - t];
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      const double occ = occupancy[t](static_cast<Eigen::Index>(s));
      if (occ == 0.0 || mdp.terminal[s]) continue;
      for (std::size_t k = 0; k < mdp.availability[s].size(); ++k) {
        const auto& outcome = mdp.availability[s][k];
        for (std::size_t a : outcome.actions.indices()) {
          // dpi/dtheta = pi * psi
          const double pa = scores.probs[s][k](static_cast<Eigen::Index>(a));
          const double weight = discount * occ * outcome.prob * pa *
                                q_remaining(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
          grad += weight * scores.psi[s][k][a];
        }
      }
    }
    discount *= mdp.gamma;
  }
  return grad;
}

Eigen::MatrixXd exact_fim(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                          std::size_t horizon) {
  check_horizon(horizon);
  const ScoreTable scores(mdp, policy);
  const auto occupancy = state_occupancy(mdp, as_tabular_policy(policy), horizon);
  const auto n = static_cast<Eigen::Index>(policy.num_params());
  Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(n, n);
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      const double occ = occupancy[t](static_cast<Eigen::Index>(s));
      if (occ == 0.0 || mdp.terminal[s]) continue;
      for (std::size_t k = 0; k < mdp.availability[s].size(); ++k) {
        const auto& outcome = mdp.availability[s][k];
        for (std::size_t a : outcome.actions.indices()) {
          const double w = discount * occ * outcome.prob * scores.probs[s][k](static_cast<Eigen::Index>(a));
          const Eigen::VectorXd& psi = scores.psi[s][k][a];
          fim.noalias() += w * psi * psi.transpose();
        }
      }
    }
    discount *= mdp.gamma;
  }
  return fim;
}

NaturalGradient natural_grad(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                             std::size_t horizon, double ridge, double agreement_tol) {
  const auto n = static_cast<Eigen::Index>(policy.num_params());
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  NaturalGradient out;
  const Eigen::MatrixXd fim = exact_fim(mdp, policy, horizon);
  out.fisher_route = (fim + ridge * identity).ldlt().solve(exact_grad_J(mdp, policy, horizon));

  // Normal equations of the discounted least-squares fit of psi^T w to q.
  const ScoreTable scores(mdp, policy);
  const TabularPolicy pi = as_tabular_policy(policy);
  const auto q = finite_horizon_q(mdp, pi, horizon);
  const StepMarginals marginals = enumerated_marginals(mdp, pi, horizon);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  double discount = 1.0;
  for (std::size_t t = 0; t < marginals.size(); ++t) {
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      for (std::size_t k = 0; k < marginals[t][s].size(); ++k) {
        const Eigen::VectorXd& m = marginals[t][s][k];
        for (Eigen::Index a = 0; a < m.size(); ++a) {
          if (m(a) == 0.0) continue;
          const Eigen::VectorXd& psi = scores.psi[s][k][static_cast<std::size_t>(a)];
          normal.noalias() += discount * m(a) * psi * psi.transpose();
          rhs += discount * m(a) * q[horizon - t](static_cast<Eigen::Index>(s), a) * psi;
        }
      }
    }
    discount *= mdp.gamma;
  }
  out.least_squares_route = (normal + ridge * identity).ldlt().solve(rhs);
  out.discrepancy = (out.fisher_route - out.least_squares_route).cwiseAbs().maxCoeff();
  if (!(out.discrepancy <= agreement_tol))
    throw NumericalError("natural_grad: Fisher and least-squares routes disagree");
  return out;
}

// --- enumeration -----------------------------------------------------------

void for_each_trajectory(const TabularSasMdp& mdp, const TabularPolicy& policy,
                         std::size_t horizon, const TrajectoryVisitor& visit) {
  check_horizon(horizon);
  const ProbabilityTable table(mdp, policy);
  enumerate(mdp, table.probs, horizon, visit);
}

EnumeratedDistribution enumerate_trajectories(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                              std::size_t horizon, std::size_t max_trajectories) {
  EnumeratedDistribution out;
  for_each_trajectory(mdp, policy, horizon, [&](std::span<const EnumeratedStep> steps, double p) {
    if (out.size() == max_trajectories)
      throw ContractViolation("enumerate_trajectories: too many trajectories");
    out.push_back({std::vector<EnumeratedStep>(steps.begin(), steps.end()), p});
  });
  return out;
}

StepMarginals enumerated_marginals(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                   std::size_t horizon) {
  check_horizon(horizon);
  const ProbabilityTable table(mdp, policy);
  StepMarginals marginals(horizon);
  for (auto& per_t : marginals) {
    per_t.resize(mdp.num_states);
    for (std::size_t s = 0; s < mdp.num_states; ++s)
      per_t[s].assign(mdp.availability[s].size(),
                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.num_actions)));
  }
  enumerate(mdp, table.probs, horizon, [&](std::span<const EnumeratedStep> steps, double p) {
    for (std::size_t t = 0; t < steps.size(); ++t)
      marginals[t][steps[t].state][steps[t].set_index](static_cast<Eigen::Index>(steps[t].action)) += p;
  });
  return marginals;
}

Eigen::VectorXd enumerated_score_gradient(const TabularSasMdp& mdp,
                                          const MaskedSoftmaxPolicy& policy, std::size_t horizon) {
  return enumerated_baseline_gradient(mdp, policy, horizon, ValueEstimator(policy.feature_dim()),
                                      QEstimator(policy.feature_dim(), policy.num_actions()),
                                      LambdaWeights{Eigen::Vector2d::Zero()});
}

Eigen::VectorXd enumerated_baseline_gradient(const TabularSasMdp& mdp,
                                             const MaskedSoftmaxPolicy& policy, std::size_t horizon,
                                             const ValueEstimator& value, const QEstimator& q,
                                             const LambdaWeights& lambda) {
  check_horizon(horizon);
  const ScoreTable scores(mdp, policy);
  // Baseline term per (s, alpha_k); it does not depend on the action.
  std::vector<std::vector<double>> baseline(mdp.num_states);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t k = 0; k < mdp.availability[s].size(); ++k) {
      baseline[s].push_back(lambda.lambda1() * value.value(scores.phi[s]) +
                            lambda.lambda2() * q.q_bar(scores.phi[s], scores.probs[s][k],
                                                       mdp.availability[s][k].actions));
    }
  }
  std::vector<double> discounts(horizon);
  discounts[0] = 1.0;
  for (std::size_t t = 1; t < horizon; ++t) discounts[t] = discounts[t - 1] * mdp.gamma;

  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.num_params()));
  std::vector<double> returns(horizon);
  enumerate(mdp, scores.probs, horizon, [&](std::span<const EnumeratedStep> steps, double p) {
    double g = 0.0;
    for (std::size_t t = steps.size(); t-- > 0;) {
      g = mdp.reward(static_cast<Eigen::Index>(steps[t].state), static_cast<Eigen::Index>(steps[t].action)) +
          mdp.gamma * g;
      returns[t] = g;
    }
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto& st = steps[t];
      total += (p * discounts[t] * (returns[t] + baseline[st.state][st.set_index])) *
               scores.psi[st.state][st.set_index][st.action];
    }
  });
  return total;
}

}  // namespace sas
