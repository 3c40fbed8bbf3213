#ifndef SAS_VARIANCE_HPP
#define SAS_VARIANCE_HPP

#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace sas {

/// Baseline mixture weights A = [lambda1, lambda2] for v-hat and q-bar.
struct LambdaWeights {
  Eigen::Vector2d a{-0.5, -0.5};

  double lambda1() const { return a(0); }
  double lambda2() const { return a(1); }
};

/// Running sums of B^T B and B^T C for one batch, where per sample
/// B = [psi * v, psi * qbar] (n x 2) and C = psi * target (n x 1).
/// Both reduce to scalar multiples of ||psi||^2.
class VarianceStats {
 public:
  void accumulate(const Eigen::VectorXd& psi, double v_hat, double q_bar, double target);

  std::size_t count() const { return count_; }
  const Eigen::Matrix2d& btb_sum() const { return btb_; }
  const Eigen::Vector2d& btc_sum() const { return btc_; }
  Eigen::Matrix2d mean_btb() const;
  Eigen::Vector2d mean_btc() const;

 private:
  Eigen::Matrix2d btb_ = Eigen::Matrix2d::Zero();
  Eigen::Vector2d btc_ = Eigen::Vector2d::Zero();
  std::size_t count_ = 0;
};

/// A-hat = -(E[B^T B] + ridge I)^{-1} E[B^T C]. Throws NumericalError when
/// the regularized matrix is still singular.
Eigen::Vector2d solve_lambda(const VarianceStats& stats, double ridge = 1e-6);

/// A <- eta * A + (1 - eta) * A_hat
LambdaWeights polyak_update(const LambdaWeights& current, const Eigen::Vector2d& a_hat,
                            double eta_lambda = 0.999);

/// One sample of the baseline-corrected gradient estimate
/// J = psi * (target + lambda1 * v + lambda2 * qbar).
struct GradientSample {
  Eigen::VectorXd psi;
  double v_hat = 0.0;
  double q_bar = 0.0;
  double target = 0.0;
};

/// Batch variance of J at `a`, in the form the closed-form A-hat
/// minimizes: mean ||C + B a||^2 - ||mean C||^2.
double sample_variance(std::span<const GradientSample> samples, const Eigen::Vector2d& a);

}  // namespace sas

#endif  // SAS_VARIANCE_HPP
