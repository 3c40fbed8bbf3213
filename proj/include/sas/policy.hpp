#ifndef SAS_POLICY_HPP
#define SAS_POLICY_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "sas/core.hpp"
#include "sas/features.hpp"

namespace sas {

/// Linear masked-softmax policy. Scores are y = theta^T phi(s); the
/// distribution is the softmax of y restricted to the available actions.
///
/// theta is d x |B|. Flattened vectors (gradients, natural-gradient weights)
/// use Eigen's column-major order, so action b owns entries [b*d, (b+1)*d).
class MaskedSoftmaxPolicy {
 public:
  MaskedSoftmaxPolicy(FeatureMap features, std::size_t num_actions);
  MaskedSoftmaxPolicy(FeatureMap features, Eigen::MatrixXd theta);

  const FeatureMap& features() const { return features_; }
  std::size_t num_actions() const { return static_cast<std::size_t>(theta_.cols()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(theta_.rows()); }
  std::size_t num_params() const { return static_cast<std::size_t>(theta_.size()); }

  const Eigen::MatrixXd& theta() const { return theta_; }
  void set_theta(Eigen::MatrixXd theta);
  Eigen::VectorXd flat_theta() const;
  void set_flat_theta(const Eigen::VectorXd& flat);
  /// theta += step, with `step` in flattened layout.
  void add_flat(const Eigen::VectorXd& step);

  Eigen::VectorXd scores(const Eigen::VectorXd& phi) const;

  /// pi(s, alpha, .) over all of B; exactly zero off the mask.
  Eigen::VectorXd action_probabilities(const Eigen::VectorXd& phi,
                                       const ActionSet& available) const;
  Eigen::VectorXd action_probabilities(const State& state, const ActionSet& available) const {
    return action_probabilities(features_.featurize(state), available);
  }

  std::size_t sample_action(const Eigen::VectorXd& phi, const ActionSet& available,
                            Rng& rng) const;
  std::size_t sample_action(const State& state, const ActionSet& available, Rng& rng) const {
    return sample_action(features_.featurize(state), available, rng);
  }

  /// d log pi(s, alpha, a) / d theta, flattened. Block b equals
  /// phi * (1{b == a} - pi(b)) for available b and zero otherwise.
  Eigen::VectorXd log_prob_grad(const Eigen::VectorXd& phi, const ActionSet& available,
                                std::size_t action) const;
  Eigen::VectorXd log_prob_grad(const State& state, const ActionSet& available,
                                std::size_t action) const {
    return log_prob_grad(features_.featurize(state), available, action);
  }
  /// Same as log_prob_grad when the action probabilities are already known.
  Eigen::VectorXd log_prob_grad_from(const Eigen::VectorXd& phi, const Eigen::VectorXd& probs,
                                     const ActionSet& available, std::size_t action) const;

 private:
  FeatureMap features_;
  Eigen::MatrixXd theta_;
};

/// Flat parameter checkpoint. The header records (d, |B|, feature kind);
/// value and q weights are optional sections written after theta.
struct Checkpoint {
  FeatureKind kind = FeatureKind::one_hot;
  Eigen::MatrixXd theta;
  std::optional<Eigen::VectorXd> value_weights;
  std::optional<Eigen::MatrixXd> q_weights;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sas

#endif  // SAS_POLICY_HPP
