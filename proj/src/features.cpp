#include "sas/features.hpp"

#include <cmath>
#include <numbers>

namespace sas {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::one_hot: return "one-hot";
    case FeatureKind::fourier: return "fourier";
    case FeatureKind::identity: return "identity";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "one-hot") return FeatureKind::one_hot;
  if (name == "fourier") return FeatureKind::fourier;
  if (name == "identity") return FeatureKind::identity;
  throw ContractViolation("unknown feature kind '" + name + "'");
}

FeatureMap::FeatureMap(FeatureKind kind, std::size_t dim, std::size_t input_dim,
                       std::size_t order)
    : kind_(kind), dim_(dim), input_dim_(input_dim), order_(order) {}

FeatureMap FeatureMap::one_hot(std::size_t num_states) {
  if (num_states == 0) throw ContractViolation("one_hot: need at least one state");
  return FeatureMap(FeatureKind::one_hot, num_states, 1, 0);
}

FeatureMap FeatureMap::identity(std::size_t dim) {
  if (dim == 0) throw ContractViolation("identity: dimension must be positive");
  return FeatureMap(FeatureKind::identity, dim, dim, 0);
}

FeatureMap FeatureMap::fourier(std::size_t order, std::size_t input_dim) {
  if (input_dim == 0) throw ContractViolation("fourier: input dimension must be positive");
  std::size_t d = 1;
  for (std::size_t i = 0; i < input_dim; ++i) d *= order + 1;
  FeatureMap map(FeatureKind::fourier, d, input_dim, order);
  map.coefficients_.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(input_dim));
  // Row r is r written in base (order+1), most significant digit first.
  for (std::size_t r = 0; r < d; ++r) {
    std::size_t rest = r;
    for (std::size_t j = input_dim; j-- > 0;) {
      map.coefficients_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          static_cast<double>(rest % (order + 1));
      rest /= order + 1;
    }
  }
  return map;
}

Eigen::VectorXd FeatureMap::featurize(const State& state) const {
  switch (kind_) {
    case FeatureKind::one_hot: {
      const StateId s = state_id(state);
      if (s >= dim_) throw ContractViolation("one_hot: state id out of range");
      Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
      out(static_cast<Eigen::Index>(s)) = 1.0;
      return out;
    }
    case FeatureKind::identity: {
      const auto& x = state_vector(state);
      if (static_cast<std::size_t>(x.size()) != dim_)
        throw ContractViolation("identity: input dimension mismatch");
      return x;
    }
    case FeatureKind::fourier: {
      const auto& x = state_vector(state);
      if (static_cast<std::size_t>(x.size()) != input_dim_)
        throw ContractViolation("fourier: input dimension mismatch");
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x(i) >= 0.0 && x(i) <= 1.0))
          throw ContractViolation("fourier: inputs must be normalized to [0,1]");
      }
      return (std::numbers::pi * (coefficients_ * x)).array().cos().matrix();
    }
  }
  throw ContractViolation("featurize: unknown feature kind");
}

}  // namespace sas
