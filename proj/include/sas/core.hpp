#ifndef SAS_CORE_HPP
#define SAS_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace sas {

/// Raised when a caller breaks an API precondition (unavailable action,
/// empty action set, mismatched dimensions, out-of-range input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a numerical routine cannot produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using StateId = std::size_t;
using StateVector = Eigen::VectorXd;

/// Discrete environments use a StateId, continuous ones a coordinate vector.
using State = std::variant<StateId, StateVector>;

StateId state_id(const State& s);
const StateVector& state_vector(const State& s);
bool same_state(const State& a, const State& b);

/// Subset of the base action set B available at one step. Never empty.
class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(std::vector<bool> mask);

  static ActionSet all(std::size_t num_actions);
  static ActionSet from_indices(std::size_t num_actions,
                                std::span<const std::size_t> indices);
  /// Bit i of `bits` marks action i; only valid for num_actions <= 64.
  static ActionSet from_bits(std::size_t num_actions, std::uint64_t bits);

  std::size_t size() const { return mask_.size(); }
  std::size_t count() const { return count_; }
  bool contains(std::size_t action) const {
    return action < mask_.size() && mask_[action];
  }
  const std::vector<bool>& mask() const { return mask_; }
  std::vector<std::size_t> indices() const;
  std::uint64_t bits() const;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

 private:
  std::vector<bool> mask_;
  std::size_t count_ = 0;
};

/// Seeded random stream. Identical seeds give identical draw sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean, double sd) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed for `stream` from `master`.
/// Stream k's seed depends only on (master, k), so adding streams never
/// changes existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct SasMdpSpec {
  std::size_t num_base_actions = 1;
  double gamma = 0.99;
  std::size_t horizon = 100;
  double availability_prob = 1.0;

  void validate() const;
};

/// Each action in `support` is kept independently with probability p,
/// conditioned on the result being non-empty (redraw on empty).
ActionSet sample_action_set(const ActionSet& support, double p, Rng& rng);
ActionSet sample_action_set(const SasMdpSpec& spec, Rng& rng);

struct StepResult {
  State next_state;
  double reward = 0.0;
  bool done = false;
};

/// Interface every SAS-MDP environment implements. Implementations are
/// immutable; per-episode state lives in the caller.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const SasMdpSpec& spec() const = 0;
  virtual State reset(Rng& rng) const = 0;
  /// Actions that can ever be available in `state`.
  virtual ActionSet support(const State& state) const;
  virtual ActionSet sample_action_set(const State& state, Rng& rng) const;
  /// `t` is the zero-based step index within the episode.
  virtual StepResult step(const State& state, std::size_t action,
                          std::size_t t, Rng& rng) const = 0;
  /// Bound on |R_t|.
  virtual double reward_bound() const = 0;
};

struct Transition {
  State state;
  ActionSet action_set;
  std::size_t action = 0;
  double reward = 0.0;
  State next_state;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::vector<double> returns;

  std::size_t size() const { return transitions.size(); }
  double undiscounted_return() const;
  double discounted_return(double gamma) const;
};

/// G_t = r_t + gamma * G_{t+1}, computed backwards from the last reward.
std::vector<double> discounted_return(std::span<const double> rewards, double gamma);

/// Runs one episode. `choose(state, action_set, rng)` returns the action
/// index; returning an unavailable action throws ContractViolation.
template <class Chooser>
Trajectory rollout(const Environment& env, Chooser&& choose, std::size_t horizon,
                   Rng& rng) {
  if (horizon == 0) throw ContractViolation("rollout: horizon must be positive");
  Trajectory traj;
  traj.transitions.reserve(horizon);
  State s = env.reset(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    ActionSet available = env.sample_action_set(s, rng);
    const std::size_t a = choose(s, available, rng);
    if (!available.contains(a)) {
      throw ContractViolation("rollout: policy chose an unavailable action " +
                              std::to_string(a));
    }
    StepResult out = env.step(s, a, t, rng);
    traj.transitions.push_back(
        Transition{s, std::move(available), a, out.reward, out.next_state, out.done});
    if (out.done) break;
    s = std::move(out.next_state);
  }
  std::vector<double> rewards;
  rewards.reserve(traj.transitions.size());
  for (const auto& tr : traj.transitions) rewards.push_back(tr.reward);
  traj.returns = discounted_return(rewards, env.spec().gamma);
  return traj;
}

}  // namespace sas

#endif  // SAS_CORE_HPP
