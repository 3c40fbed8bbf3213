#include "sas/variance.hpp"

#include <Eigen/LU>

#include <cmath>

#include "sas/core.hpp"

namespace sas {

void VarianceStats::accumulate(const Eigen::VectorXd& psi, double v_hat, double q_bar,
                               double target) {
  const double norm2 = psi.squaredNorm();
  btb_(0, 0) += norm2 * v_hat * v_hat;
  btb_(0, 1) += norm2 * v_hat * q_bar;
  btb_(1, 0) += norm2 * v_hat * q_bar;
  btb_(1, 1) += norm2 * q_bar * q_bar;
  btc_(0) += norm2 * v_hat * target;
  btc_(1) += norm2 * q_bar * target;
  ++count_;
}

Eigen::Matrix2d VarianceStats::mean_btb() const {
  if (count_ == 0) throw ContractViolation("VarianceStats: no samples");
  return btb_ / static_cast<double>(count_);
}

Eigen::Vector2d VarianceStats::mean_btc() const {
  if (count_ == 0) throw ContractViolation("VarianceStats: no samples");
  return btc_ / static_cast<double>(count_);
}

Eigen::Vector2d solve_lambda(const VarianceStats& stats, double ridge) {
  if (stats.count() == 0) throw ContractViolation("solve_lambda: no samples");
  if (ridge < 0.0) throw ContractViolation("solve_lambda: ridge must be non-negative");
  const Eigen::Matrix2d m = stats.mean_btb() + ridge * Eigen::Matrix2d::Identity();
  const Eigen::Vector2d rhs = stats.mean_btc();
  const double det = m.determinant();
  const double scale = m.cwiseAbs().maxCoeff();
  if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-14 * scale * scale)
    throw NumericalError("solve_lambda: E[B^T B] is singular");
  Eigen::Matrix2d inv;
  inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return -(inv / det) * rhs;
}

LambdaWeights polyak_update(const LambdaWeights& current, const Eigen::Vector2d& a_hat,
                            double eta_lambda) {
  if (!(eta_lambda >= 0.0 && eta_lambda <= 1.0))
    throw ContractViolation("polyak_update: eta_lambda must lie in [0,1]");
  LambdaWeights next;
  next.a = eta_lambda * current.a + (1.0 - eta_lambda) * a_hat;
  return next;
}

double sample_variance(std::span<const GradientSample> samples, const Eigen::Vector2d& a) {
  if (samples.empty()) throw ContractViolation("sample_variance: no samples");
  const Eigen::Index n = samples.front().psi.size();
  Eigen::VectorXd mean_c = Eigen::VectorXd::Zero(n);
  double second_moment = 0.0;
  for (const auto& s : samples) {
    const Eigen::VectorXd j = s.psi * (s.target + a(0) * s.v_hat + a(1) * s.q_bar);
    second_moment += j.squaredNorm();
    mean_c += s.psi * s.target;
  }
  const double count = static_cast<double>(samples.size());
  mean_c /= count;
  return second_moment / count - mean_c.squaredNorm();
}

}  // namespace sas
