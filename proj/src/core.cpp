#include "sas/core.hpp"

#include <cmath>

namespace sas {

StateId state_id(const State& s) {
  if (const auto* id = std::get_if<StateId>(&s)) return *id;
  throw ContractViolation("expected a discrete state");
}

const StateVector& state_vector(const State& s) {
  if (const auto* x = std::get_if<StateVector>(&s)) return *x;
  throw ContractViolation("expected a continuous state");
}

bool same_state(const State& a, const State& b) {
  if (a.index() != b.index()) return false;
  if (const auto* id = std::get_if<StateId>(&a)) return *id == std::get<StateId>(b);
  const auto& x = std::get<StateVector>(a);
  const auto& y = std::get<StateVector>(b);
  return x.size() == y.size() && x == y;
}

ActionSet::ActionSet(std::vector<bool> mask) : mask_(std::move(mask)) {
  for (bool m : mask_) count_ += m ? 1 : 0;
  if (count_ == 0) throw ContractViolation("ActionSet: action set must be non-empty");
}

ActionSet ActionSet::all(std::size_t num_actions) {
  return ActionSet(std::vector<bool>(num_actions, true));
}

ActionSet ActionSet::from_indices(std::size_t num_actions,
                                  std::span<const std::size_t> indices) {
  std::vector<bool> mask(num_actions, false);
  for (std::size_t i : indices) {
    if (i >= num_actions) throw ContractViolation("ActionSet: index out of range");
    mask[i] = true;
  }
  return ActionSet(std::move(mask));
}

ActionSet ActionSet::from_bits(std::size_t num_actions, std::uint64_t bits) {
  if (num_actions > 64) throw ContractViolation("ActionSet::from_bits: more than 64 actions");
  std::vector<bool> mask(num_actions, false);
  for (std::size_t i = 0; i < num_actions; ++i) mask[i] = (bits >> i) & 1U;
  return ActionSet(std::move(mask));
}

std::vector<std::size_t> ActionSet::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) out.push_back(i);
  return out;
}

std::uint64_t ActionSet::bits() const {
  if (mask_.size() > 64) throw ContractViolation("ActionSet::bits: more than 64 actions");
  std::uint64_t b = 0;
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) b |= std::uint64_t{1} << i;
  return b;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 applied to master offset by the stream index.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void SasMdpSpec::validate() const {
  if (num_base_actions == 0) throw ContractViolation("SasMdpSpec: no base actions");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("SasMdpSpec: gamma must lie in [0,1)");
  if (horizon == 0) throw ContractViolation("SasMdpSpec: horizon must be positive");
  if (!(availability_prob > 0.0 && availability_prob <= 1.0))
    throw ContractViolation("SasMdpSpec: availability_prob must lie in (0,1]");
}

ActionSet sample_action_set(const ActionSet& support, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0))
    throw ContractViolation("sample_action_set: availability probability must lie in (0,1]");
  const auto& allowed = support.mask();
  std::vector<bool> mask(allowed.size(), false);
  for (;;) {
    bool any = false;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
      mask[i] = allowed[i] && rng.bernoulli(p);
      any = any || mask[i];
    }
    if (any) return ActionSet(mask);
  }
}

ActionSet sample_action_set(const SasMdpSpec& spec, Rng& rng) {
  return sample_action_set(ActionSet::all(spec.num_base_actions), spec.availability_prob, rng);
}

ActionSet Environment::support(const State&) const {
  return ActionSet::all(spec().num_base_actions);
}

ActionSet Environment::sample_action_set(const State& state, Rng& rng) const {
  return sas::sample_action_set(support(state), spec().availability_prob, rng);
}

double Trajectory::undiscounted_return() const {
  double total = 0.0;
  for (const auto& tr : transitions) total += tr.reward;
  return total;
}

double Trajectory::discounted_return(double gamma) const {
  double total = 0.0;
  double discount = 1.0;
  for (const auto& tr : transitions) {
    total += discount * tr.reward;
    discount *= gamma;
  }
  return total;
}

std::vector<double> discounted_return(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw ContractViolation("discounted_return: rewards must be non-empty");
  std::vector<double> out(rewards.size());
  double g = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    g = rewards[i] + gamma * g;
    out[i] = g;
  }
  return out;
}

}  // namespace sas
