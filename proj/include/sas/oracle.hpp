#ifndef SAS_ORACLE_HPP
#define SAS_ORACLE_HPP

// Exact computations on small tabular SAS-MDPs. Everything here is a
// deterministic function of (mdp, policy); nothing samples.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sas/envs.hpp"
#include "sas/estimators.hpp"
#include "sas/policy.hpp"
#include "sas/variance.hpp"

namespace sas {

/// pi(s, alpha, .) over all of B.
using TabularPolicy = std::function<Eigen::VectorXd(StateId, const ActionSet&)>;

/// Tabular view of a masked-softmax policy over discrete states.
TabularPolicy as_tabular_policy(const MaskedSoftmaxPolicy& policy);

// --- Bellman operators -----------------------------------------------------

/// (T^pi v)(s) = sum_alpha phi(s,alpha) sum_{a in alpha} pi(s,alpha,a)
///               sum_s' P(s,a,s') (R(s,a) + gamma v(s')); zero at terminals.
Eigen::VectorXd sas_bellman_backup(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                   const Eigen::VectorXd& v);

/// (T* v)(s): as above with the inner expectation over pi replaced by a
/// max over the available actions.
Eigen::VectorXd sas_optimality_backup(const TabularSasMdp& mdp, const Eigen::VectorXd& v);

/// Repeated T^pi backups from zero until the sup-norm change drops below tol.
Eigen::VectorXd evaluate_policy_iterative(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                          double tol = 1e-12, std::size_t max_iterations = 100000);

/// Direct solve of v = r^pi + gamma P^pi v.
Eigen::VectorXd evaluate_policy_linear(const TabularSasMdp& mdp, const TabularPolicy& policy);

/// J(pi) = d0 . v^pi (infinite horizon).
double policy_value(const TabularSasMdp& mdp, const TabularPolicy& policy);

/// Per-state ranking over B; the executed action is the highest-ranked
/// available one.
struct DecisionListPolicy {
  std::vector<std::vector<std::size_t>> ranking;

  std::size_t act(StateId state, const ActionSet& available) const;
  TabularPolicy as_policy() const;
};

struct ValueIterationResult {
  Eigen::VectorXd values;
  DecisionListPolicy policy;
  std::size_t iterations = 0;
};

/// Iterates T* to sup-norm tolerance and ranks actions by the one-step
/// lookahead R(s,a) + gamma sum_s' P(s,a,s') v*(s') (ties: lowest index
/// first). Throws NumericalError when max_iterations is reached.
ValueIterationResult sas_value_iteration(const TabularSasMdp& mdp, double tol = 1e-10,
                                         std::size_t max_iterations = 1000000);

// --- finite-horizon quantities ----------------------------------------------

struct ExactReturn {
  double value = 0.0;
  /// gamma^H R_max / (1 - gamma): bound on the mass beyond the horizon.
  double truncation_bound = 0.0;
};

/// Pr(S_t = s) for t = 0..horizon-1.
std::vector<Eigen::VectorXd> state_occupancy(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                             std::size_t horizon);

/// q_k(s, a) for k = 0..horizon with k steps to go (q_0 = 0).
std::vector<Eigen::MatrixXd> finite_horizon_q(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                              std::size_t horizon);

/// E[sum_{t<H} gamma^t R_t] by forward propagation of the state distribution.
ExactReturn exact_J(const TabularSasMdp& mdp, const TabularPolicy& policy, std::size_t horizon);

/// sum_t gamma^t sum_s Pr(S_t=s) sum_alpha phi(s,alpha) sum_a q(s,a) dpi(s,alpha,a)/dtheta,
/// with q the finite-horizon value for the remaining H - t steps.
Eigen::VectorXd exact_grad_J(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                             std::size_t horizon);

/// sum_t gamma^t sum_s Pr(S_t=s) sum_alpha phi(s,alpha) sum_a pi psi psi^T.
Eigen::MatrixXd exact_fim(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                          std::size_t horizon);

struct NaturalGradient {
  /// (F + ridge I)^{-1} grad J.
  Eigen::VectorXd fisher_route;
  /// Minimizer of E[sum_t gamma^t (psi^T w - q)^2 / 2] (plus ridge) over the
  /// enumerated trajectory distribution.
  Eigen::VectorXd least_squares_route;
  double discrepancy = 0.0;
};

/// Computes both routes and throws NumericalError if they differ by more
/// than `agreement_tol` in any entry.
NaturalGradient natural_grad(const TabularSasMdp& mdp, const MaskedSoftmaxPolicy& policy,
                             std::size_t horizon, double ridge = 1e-8, double agreement_tol = 1e-6);

// --- trajectory enumeration -------------------------------------------------

/// One enumerated step: the state, the index of the realized action set in
/// mdp.availability[state], and the action.
struct EnumeratedStep {
  StateId state = 0;
  std::size_t set_index = 0;
  std::size_t action = 0;
};

struct EnumeratedTrajectory {
  std::vector<EnumeratedStep> steps;
  double probability = 0.0;
};

using EnumeratedDistribution = std::vector<EnumeratedTrajectory>;

using TrajectoryVisitor = std::function<void(std::span<const EnumeratedStep>, double)>;

/// Visits every trajectory of length `horizon` (shorter if it reaches a
/// terminal state) with non-zero probability
/// d0(s0) prod_t phi(s_t, alpha_t) pi(s_t, alpha_t, a_t) P(s_t, a_t, s_{t+1}).
void for_each_trajectory(const TabularSasMdp& mdp, const TabularPolicy& policy,
                         std::size_t horizon, const TrajectoryVisitor& visit);

/// Materialized enumeration. Throws ContractViolation past `max_trajectories`.
EnumeratedDistribution enumerate_trajectories(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                              std::size_t horizon,
                                              std::size_t max_trajectories = 1000000);

/// marginals[t][s][set_index](a) = Pr(S_t = s, A_t = alpha, A_t = a) summed
/// over enumerated trajectories.
using StepMarginals = std::vector<std::vector<std::vector<Eigen::VectorXd>>>;
StepMarginals enumerated_marginals(const TabularSasMdp& mdp, const TabularPolicy& policy,
                                   std::size_t horizon);

/// E[sum_t gamma^t G_t psi_t] over enumerated trajectories, G_t the
/// truncated discounted return from t.
Eigen::VectorXd enumerated_score_gradient(const TabularSasMdp& mdp,
                                          const MaskedSoftmaxPolicy& policy, std::size_t horizon);

/// E[sum_t gamma^t psi_t (G_t + lambda1 v(s_t) + lambda2 qbar(s_t, alpha_t))].
Eigen::VectorXd enumerated_baseline_gradient(const TabularSasMdp& mdp,
                                             const MaskedSoftmaxPolicy& policy, std::size_t horizon,
                                             const ValueEstimator& value, const QEstimator& q,
                                             const LambdaWeights& lambda);

}  // namespace sas

#endif  // SAS_ORACLE_HPP
