#include "sas/estimators.hpp"

namespace sas {

ValueEstimator::ValueEstimator(std::size_t feature_dim)
    : varpi_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_dim))) {}

ValueEstimator::ValueEstimator(Eigen::VectorXd weights) : varpi_(std::move(weights)) {
  if (!varpi_.allFinite()) throw ContractViolation("ValueEstimator: non-finite weights");
}

double ValueEstimator::value(const Eigen::VectorXd& phi) const {
  if (phi.size() != varpi_.size()) throw ContractViolation("v_hat: feature size mismatch");
  return phi.dot(varpi_);
}

void ValueEstimator::update(const Eigen::VectorXd& phi, double target, double eta) {
  const double error = target - value(phi);
  varpi_ += eta * error * phi;
}

QEstimator::QEstimator(std::size_t feature_dim, std::size_t num_actions)
    : omega_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(feature_dim),
                                   static_cast<Eigen::Index>(num_actions))) {}

QEstimator::QEstimator(Eigen::MatrixXd weights) : omega_(std::move(weights)) {
  if (!omega_.allFinite()) throw ContractViolation("QEstimator: non-finite weights");
}

Eigen::VectorXd QEstimator::q_values(const Eigen::VectorXd& phi) const {
  if (phi.size() != omega_.rows()) throw ContractViolation("q_hat: feature size mismatch");
  return omega_.transpose() * phi;
}

double QEstimator::q_bar(const Eigen::VectorXd& phi, const Eigen::VectorXd& probs,
                         const ActionSet& available) const {
  if (probs.size() != omega_.cols() || available.size() != static_cast<std::size_t>(omega_.cols()))
    throw ContractViolation("q_bar: action dimension mismatch");
  double total = 0.0;
  for (Eigen::Index a = 0; a < omega_.cols(); ++a) {
    if (!available.contains(static_cast<std::size_t>(a))) continue;
    total += probs(a) * omega_.col(a).dot(phi);
  }
  return total;
}

void QEstimator::update(const Eigen::VectorXd& phi, const Eigen::VectorXd& probs,
                        const ActionSet& available, double target, double eta) {
  const double error = target - q_bar(phi, probs, available);
  for (Eigen::Index a = 0; a < omega_.cols(); ++a) {
    if (!available.contains(static_cast<std::size_t>(a))) continue;
    omega_.col(a) += eta * error * probs(a) * phi;
  }
}

}  // namespace sas
