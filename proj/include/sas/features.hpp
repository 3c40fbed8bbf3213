#ifndef SAS_FEATURES_HPP
#define SAS_FEATURES_HPP

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "sas/core.hpp"

namespace sas {

enum class FeatureKind { one_hot, fourier, identity };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// Maps a state to a fixed-length real vector.
///
/// one_hot(n): discrete states 0..n-1 to unit vectors.
/// fourier(order, k): coupled Fourier basis over k inputs in [0,1], one
///   feature cos(pi * c . x) per coefficient vector c in {0..order}^k,
///   enumerated lexicographically (first coordinate slowest). d = (order+1)^k.
/// identity(k): continuous passthrough.
class FeatureMap {
 public:
  static FeatureMap one_hot(std::size_t num_states);
  static FeatureMap fourier(std::size_t order, std::size_t input_dim);
  static FeatureMap identity(std::size_t dim);

  FeatureKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t order() const { return order_; }
  /// Fourier coefficient vectors, one per row.
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }

  Eigen::VectorXd featurize(const State& state) const;

 private:
  FeatureMap(FeatureKind kind, std::size_t dim, std::size_t input_dim, std::size_t order);

  FeatureKind kind_;
  std::size_t dim_;
  std::size_t input_dim_;
  std::size_t order_;
  Eigen::MatrixXd coefficients_;
};

}  // namespace sas

#endif  // SAS_FEATURES_HPP
