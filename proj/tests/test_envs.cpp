#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "sas/envs.hpp"

using namespace sas;

TEST_CASE("counter-example slots and multipliers") {
  using E = CounterexampleEnv;
  // Slots are zero-based: a1 uses theta[0], a2 uses theta[1].
  const SlotFeature s1a1 = counterexample_features(E::kLeft, E::kLeftAction);
  CHECK(s1a1.slot == 0);
  CHECK(s1a1.multiplier == 1.0);
  const SlotFeature s2a2 = counterexample_features(E::kRight, E::kRightAction);
  CHECK(s2a2.slot == 1);
  CHECK(s2a2.multiplier == 2.0);
  const SlotFeature s2a1 = counterexample_features(E::kRight, E::kLeftAction);
  CHECK(s2a1.slot == 0);
  CHECK(s2a1.multiplier == 2.0);
  CHECK_THROWS_AS(counterexample_features(2, 0), ContractViolation);
}

TEST_CASE("counter-example dynamics are deterministic with zero reward") {
  const CounterexampleEnv env;
  Rng rng(0);
  CHECK(env.spec().gamma == 1.0);
  for (StateId s : {CounterexampleEnv::kLeft, CounterexampleEnv::kRight}) {
    const StepResult left = env.step(State{s}, CounterexampleEnv::kLeftAction, 0, rng);
    const StepResult right = env.step(State{s}, CounterexampleEnv::kRightAction, 0, rng);
    CHECK(state_id(left.next_state) == CounterexampleEnv::kLeft);
    CHECK(state_id(right.next_state) == CounterexampleEnv::kRight);
    CHECK(left.reward == 0.0);
    CHECK(right.reward == 0.0);
    CHECK_FALSE(left.done);
  }
}

TEST_CASE("random tabular MDPs satisfy the table invariants") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularSasMdp mdp = make_random_tabular_mdp(4, 3, 0.9, seed, 2);
    CHECK_NOTHROW(mdp.validate());
    for (std::size_t a = 0; a < 3; ++a) {
      for (Eigen::Index s = 0; s < 4; ++s) {
        CHECK(std::abs(mdp.transition[a].row(s).sum() - 1.0) < 1e-12);
        int successors = 0;
        for (Eigen::Index t = 0; t < 4; ++t) successors += mdp.transition[a](s, t) > 0.0;
        CHECK(successors == 2);
      }
    }
    for (std::size_t s = 0; s < 4; ++s) {
      double total = 0.0;
      for (const auto& o : mdp.availability[s]) {
        CHECK(o.actions.count() >= 1);
        total += o.prob;
      }
      CHECK(mdp.availability[s].size() == 7);
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(mdp.reward.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("tabular validation rejects broken tables") {
  TabularSasMdp mdp = make_random_tabular_mdp(3, 2, 0.9, 1);
  TabularSasMdp bad = mdp;
  bad.transition[0](0, 0) += 0.1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = mdp;
  bad.availability[1][0].prob += 0.1;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = mdp;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = mdp;
  bad.terminal[2] = true;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("tabular env samples availability and transitions per the tables") {
  const TabularSasMdp mdp = make_random_tabular_mdp(3, 2, 0.9, 5);
  const TabularToyEnv env(mdp, 10);
  Rng rng(6);
  const int n = 200000;
  std::map<std::uint64_t, double> freq;
  Eigen::VectorXd next = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < n; ++i) {
    freq[env.sample_action_set(State{StateId{1}}, rng).bits()] += 1.0 / n;
    next(static_cast<Eigen::Index>(state_id(env.step(State{StateId{1}}, 0, 0, rng).next_state))) += 1.0 / n;
  }
  for (const auto& o : mdp.availability[1]) CHECK(std::abs(freq[o.actions.bits()] - o.prob) < 0.006);
  CHECK((next - mdp.transition[0].row(1).transpose()).cwiseAbs().maxCoeff() < 0.006);
  CHECK(env.step(State{StateId{1}}, 1, 0, rng).reward == mdp.reward(1, 1));
}

TEST_CASE("routing graph is strongly connected and deterministic given the seed") {
  RoutingConfig cfg;
  const RoutingGraphEnv a = make_routing_env(cfg);
  const RoutingGraphEnv b = make_routing_env(cfg);
  CHECK(a.out_edges() == b.out_edges());
  CHECK(a.goal() == b.goal());
  CHECK(strongly_connected(a.out_edges()));
  cfg.seed = 2;
  const RoutingGraphEnv c = make_routing_env(cfg);
  CHECK(strongly_connected(c.out_edges()));
  CHECK(c.out_edges() != a.out_edges());
}

TEST_CASE("routing construction faults when connectivity is out of reach") {
  RoutingConfig cfg;
  cfg.edge_density = 0.01;
  cfg.max_attempts = 20;
  CHECK_THROWS_AS(make_routing_env(cfg), std::runtime_error);
  cfg.num_nodes = 1;
  CHECK_THROWS_AS(make_routing_env(cfg), ContractViolation);
}

TEST_CASE("strongly_connected on hand-built graphs") {
  CHECK(strongly_connected({{1}, {2}, {0}}));
  CHECK_FALSE(strongly_connected({{1}, {2}, {}}));
  CHECK_FALSE(strongly_connected({{1}, {0}, {0}}));
}

TEST_CASE("routing steps: goal entry ends the episode, other moves pay the penalty") {
  RoutingConfig cfg;
  cfg.num_nodes = 3;
  const RoutingGraphEnv env(cfg, {{1, 2}, {2}, {0}}, 2);
  Rng rng(0);
  const StepResult into_goal = env.step(State{StateId{0}}, 2, 0, rng);
  CHECK(into_goal.done);
  CHECK(into_goal.reward == 100.0);
  CHECK(state_id(into_goal.next_state) == 2);
  const StepResult detour = env.step(State{StateId{0}}, 1, 0, rng);
  CHECK_FALSE(detour.done);
  CHECK(detour.reward == -1.0);
  CHECK_THROWS_AS(env.step(State{StateId{1}}, 0, 0, rng), ContractViolation);
  CHECK(env.support(State{StateId{0}}) == ActionSet::from_bits(3, 0b110));
  for (int i = 0; i < 200; ++i) CHECK(state_id(env.reset(rng)) != 2);
}

TEST_CASE("routing availability stays within out-edges") {
  const RoutingGraphEnv env = make_routing_env(RoutingConfig{});
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const StateId s = rng.index(env.num_nodes());
    const ActionSet a = env.sample_action_set(State{s}, rng);
    CHECK((a.bits() & ~env.support(State{s}).bits()) == 0u);
  }
}

TEST_CASE("routing tabular form matches the simulator") {
  RoutingConfig cfg;
  cfg.num_nodes = 8;
  cfg.edge_density = 0.3;
  cfg.availability_prob = 0.6;
  const RoutingGraphEnv env = make_routing_env(cfg);
  const TabularSasMdp mdp = env.to_tabular();
  CHECK(mdp.terminal[env.goal()]);
  CHECK(mdp.start(static_cast<Eigen::Index>(env.goal())) == 0.0);
  Rng rng(1);
  for (std::size_t s = 0; s < cfg.num_nodes; ++s) {
    if (s == env.goal()) continue;
    for (std::size_t v : env.out_edges()[s]) {
      const StepResult r = env.step(State{s}, v, 0, rng);
      CHECK(mdp.transition[v](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(v)) == 1.0);
      CHECK(mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(v)) == r.reward);
    }
    // Conditioning on non-empty sets: Pr(alpha) = p^k (1-p)^(n-k) / (1 - (1-p)^n).
    const std::size_t k = env.out_edges()[s].size();
    const double z = 1.0 - std::pow(0.4, static_cast<double>(k));
    for (const auto& o : mdp.availability[s]) {
      const double c = static_cast<double>(o.actions.count());
      CHECK(std::abs(o.prob - std::pow(0.6, c) * std::pow(0.4, static_cast<double>(k) - c) / z) < 1e-14);
    }
  }
}

TEST_CASE("maze: moving into the wall leaves the position unchanged") {
  const MazeEnv env{MazeConfig{}};
  Rng rng(0);
  // Actuator 0 points along +x; the wall sits at x = 0.5 for y in [0, 0.7].
  const Eigen::Vector2d start(0.48, 0.3);
  const StepResult r = env.step(State{StateVector(start)}, 0, 0, rng);
  CHECK(state_vector(r.next_state) == start);
  CHECK(r.reward == -0.05);
  CHECK_FALSE(r.done);
  // Above the wall the same move goes through.
  const Eigen::Vector2d gap(0.48, 0.8);
  const StepResult through = env.step(State{StateVector(gap)}, 0, 0, rng);
  CHECK(std::abs(state_vector(through.next_state).x() - 0.53) < 1e-12);
}

TEST_CASE("maze: moves leaving the unit square are blocked") {
  const MazeEnv env{MazeConfig{}};
  Rng rng(0);
  const Eigen::Vector2d corner(0.02, 0.02);
  // Actuator 8 of 16 points along -x.
  const StepResult r = env.step(State{StateVector(corner)}, 8, 0, rng);
  CHECK(state_vector(r.next_state) == corner);
  CHECK(r.reward == -0.05);
}

TEST_CASE("maze: actuators are spread at equal angles") {
  const MazeEnv env{MazeConfig{}};
  Rng rng(0);
  const Eigen::Vector2d c(0.25, 0.5);
  for (std::size_t k = 0; k < 16; ++k) {
    const StepResult r = env.step(State{StateVector(c)}, k, 0, rng);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / 16.0;
    const Eigen::Vector2d expected = c + 0.05 * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    CHECK((state_vector(r.next_state) - expected).norm() < 1e-12);
  }
}

TEST_CASE("maze: reaching the goal pays the goal reward and ends the episode") {
  const MazeEnv env{MazeConfig{}};
  Rng rng(0);
  const StepResult r = env.step(State{StateVector(Eigen::Vector2d(0.78, 0.9))}, 0, 0, rng);
  CHECK(r.done);
  CHECK(r.reward == 100.0);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd x = state_vector(env.reset(rng));
    CHECK_FALSE(env.in_goal(x));
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
}

TEST_CASE("maze: random walks stay inside the square") {
  const MazeEnv env{MazeConfig{}};
  Rng rng(12);
  auto choose = [](const State&, const ActionSet& a, Rng& r) {
    const auto idx = a.indices();
    return idx[r.index(idx.size())];
  };
  for (int e = 0; e < 20; ++e) {
    const Trajectory t = rollout(env, choose, 200, rng);
    for (const auto& tr : t.transitions) {
      const Eigen::VectorXd& x = state_vector(tr.next_state);
      CHECK(x.minCoeff() >= 0.0);
      CHECK(x.maxCoeff() <= 1.0);
      CHECK(std::abs(tr.reward) <= env.reward_bound());
    }
  }
}

TEST_CASE("segment intersection") {
  using V = Eigen::Vector2d;
  CHECK(segments_intersect(V(0, 0), V(1, 1), V(0, 1), V(1, 0)));
  CHECK_FALSE(segments_intersect(V(0, 0), V(1, 0), V(0, 1), V(1, 1)));
  CHECK(segments_intersect(V(0, 0), V(1, 0), V(1, 0), V(2, 5)));
  CHECK_FALSE(segments_intersect(V(0, 0), V(0.4, 0), V(0.5, -1), V(0.5, 1)));
}

TEST_CASE("recommender: episodes last exactly five steps with bounded rewards") {
  const RecommenderEnv env{RecommenderConfig{}};
  CHECK(env.spec().num_base_actions == 100);
  Rng rng(2);
  auto choose = [](const State&, const ActionSet& a, Rng& r) {
    const auto idx = a.indices();
    return idx[r.index(idx.size())];
  };
  for (int e = 0; e < 200; ++e) {
    const Trajectory t = rollout(env, choose, 50, rng);
    CHECK(t.size() == 5);
    CHECK(t.transitions.back().done);
    const Eigen::VectorXd& ctx = state_vector(t.transitions.front().state);
    CHECK(ctx.size() == 10);
    for (const auto& tr : t.transitions) {
      CHECK(std::abs(tr.reward) <= env.reward_bound());
      const double mean = env.product_means()(static_cast<Eigen::Index>(tr.action));
      CHECK(std::abs(tr.reward - mean) <= 0.3 + 1e-12);
      CHECK(state_vector(tr.next_state) == ctx);
    }
  }
}

TEST_CASE("recommender: the step at t = 4 is terminal") {
  const RecommenderEnv env{RecommenderConfig{}};
  Rng rng(1);
  const State s = env.reset(rng);
  CHECK_FALSE(env.step(s, 0, 3, rng).done);
  CHECK(env.step(s, 0, 4, rng).done);
}

TEST_CASE("recommender: product means depend only on the seed") {
  RecommenderConfig cfg;
  const RecommenderEnv a(cfg);
  const RecommenderEnv b(cfg);
  CHECK(a.product_means() == b.product_means());
  cfg.seed = 9;
  CHECK(RecommenderEnv(cfg).product_means() != a.product_means());
  const double mean = a.product_means().mean();
  CHECK(std::abs(mean - 1.0) < 0.4);
}
