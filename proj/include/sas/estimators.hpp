#ifndef SAS_ESTIMATORS_HPP
#define SAS_ESTIMATORS_HPP

#include <cstddef>

#include <Eigen/Core>

#include "sas/core.hpp"

namespace sas {

/// Linear state-value estimate v(s) = phi(s) . varpi.
class ValueEstimator {
 public:
  explicit ValueEstimator(std::size_t feature_dim);
  explicit ValueEstimator(Eigen::VectorXd weights);

  const Eigen::VectorXd& weights() const { return varpi_; }
  double value(const Eigen::VectorXd& phi) const;
  /// varpi += eta * (target - v(s)) * phi(s)
  void update(const Eigen::VectorXd& phi, double target, double eta);

 private:
  Eigen::VectorXd varpi_;
};

/// Per-action linear q estimate q(s, a) = phi(s) . omega[:, a], and the
/// action-set baseline qbar(s, alpha) = sum_{a in alpha} pi(s, alpha, a) q(s, a).
class QEstimator {
 public:
  QEstimator(std::size_t feature_dim, std::size_t num_actions);
  explicit QEstimator(Eigen::MatrixXd weights);

  const Eigen::MatrixXd& weights() const { return omega_; }
  Eigen::VectorXd q_values(const Eigen::VectorXd& phi) const;
  /// `probs` is pi(s, alpha, .) over all of B (zero off the mask).
  double q_bar(const Eigen::VectorXd& phi, const Eigen::VectorXd& probs,
               const ActionSet& available) const;
  /// Gradient step on (target - qbar)^2 / 2. Column a moves by
  /// eta * (target - qbar) * pi(a) * phi; unavailable columns are untouched.
  void update(const Eigen::VectorXd& phi, const Eigen::VectorXd& probs,
              const ActionSet& available, double target, double eta);

 private:
  Eigen::MatrixXd omega_;
};

}  // namespace sas

#endif  // SAS_ESTIMATORS_HPP
