#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/LU>

#include "sas/core.hpp"
#include "sas/variance.hpp"

using namespace sas;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal(0.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("lambda weights start at -0.5") {
  const LambdaWeights l;
  CHECK(l.lambda1() == -0.5);
  CHECK(l.lambda2() == -0.5);
}

TEST_CASE("a zero psi adds nothing to the sums") {
  VarianceStats s;
  s.accumulate(Eigen::Vector3d(1, 0, 2), 1.5, -0.5, 2.0);
  const Eigen::Matrix2d btb = s.btb_sum();
  const Eigen::Vector2d btc = s.btc_sum();
  s.accumulate(Eigen::Vector3d::Zero(), 10.0, 20.0, 30.0);
  CHECK(s.btb_sum() == btb);
  CHECK(s.btc_sum() == btc);
  CHECK(s.count() == 2);
}

TEST_CASE("equal v and q make B^T B rank one") {
  VarianceStats s;
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const double v = rng.normal(0.0, 1.0);
    s.accumulate(random_vector(4, rng), v, v, rng.normal(0.0, 1.0));
  }
  const Eigen::Matrix2d m = s.btb_sum();
  CHECK(std::abs(m(0, 0) - m(0, 1)) < 1e-12 * m.norm());
  CHECK(std::abs(m(1, 1) - m(0, 1)) < 1e-12 * m.norm());
  CHECK(std::abs(m.determinant()) < 1e-12 * m.squaredNorm());
}

TEST_CASE("two hand-built samples match explicit matrix products") {
  struct Sample {
    Eigen::VectorXd psi;
    double v, q, g;
  };
  const std::vector<Sample> samples{{Eigen::Vector3d(1, -2, 0.5), 0.7, -1.2, 3.0},
                                    {Eigen::Vector3d(0.1, 0.3, -4), -2.0, 0.4, -1.5}};
  VarianceStats s;
  Eigen::Matrix2d btb = Eigen::Matrix2d::Zero();
  Eigen::Vector2d btc = Eigen::Vector2d::Zero();
  for (const auto& x : samples) {
    s.accumulate(x.psi, x.v, x.q, x.g);
    Eigen::MatrixXd B(x.psi.size(), 2);
    B.col(0) = x.psi * x.v;
    B.col(1) = x.psi * x.q;
    const Eigen::VectorXd C = x.psi * x.g;
    btb += B.transpose() * B;
    btc += B.transpose() * C;
  }
  CHECK((s.btb_sum() - btb).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.btc_sum() - btc).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.mean_btb() - btb / 2.0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.mean_btc() - btc / 2.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exact linear recovery with ridge zero") {
  VarianceStats s;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const double v = rng.normal(0.0, 1.0);
    const double q = rng.normal(0.0, 1.0);
    s.accumulate(random_vector(5, rng), v, q, -(0.3 * v + 0.7 * q));
  }
  const Eigen::Vector2d a = solve_lambda(s, 0.0);
  CHECK(std::abs(a(0) - 0.3) < 1e-12);
  CHECK(std::abs(a(1) - 0.7) < 1e-12);
}

TEST_CASE("zero B^T C gives A-hat = 0") {
  VarianceStats s;
  s.accumulate(Eigen::Vector2d(1, 1), 1.0, 2.0, 0.0);
  s.accumulate(Eigen::Vector2d(0, 3), -1.0, 0.5, 0.0);
  CHECK(solve_lambda(s).isZero());
}

TEST_CASE("A-hat matches a brute-force grid minimum of the sample variance") {
  Rng rng(3);
  std::vector<GradientSample> samples;
  VarianceStats s;
  for (int i = 0; i < 64; ++i) {
    GradientSample x{random_vector(4, rng), rng.normal(1.0, 1.0), rng.normal(0.5, 1.0), 0.0};
    x.target = -0.8 * x.v_hat + 0.4 * x.q_bar + rng.normal(0.0, 0.5);
    s.accumulate(x.psi, x.v_hat, x.q_bar, x.target);
    samples.push_back(x);
  }
  const Eigen::Vector2d a = solve_lambda(s);
  REQUIRE(a.cwiseAbs().maxCoeff() <= 2.0);
  // The objective is quadratic in A, so a coarse grid plus local refinement
  // at step 1e-3 locates its minimizer to grid resolution.
  Eigen::Vector2d best(0, 0);
  double best_value = sample_variance(samples, best);
  for (double step : {0.05, 1e-3}) {
    const Eigen::Vector2d center = best;
    const double radius = step == 0.05 ? 2.0 : 0.05;
    for (double x = center(0) - radius; x <= center(0) + radius + 1e-12; x += step) {
      for (double y = center(1) - radius; y <= center(1) + radius + 1e-12; y += step) {
        if (std::abs(x) > 2.0 || std::abs(y) > 2.0) continue;
        const double value = sample_variance(samples, Eigen::Vector2d(x, y));
        if (value < best_value) {
          best_value = value;
          best = Eigen::Vector2d(x, y);
        }
      }
    }
  }
  CHECK((a - best).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(sample_variance(samples, a) <= best_value + 1e-12);
}

TEST_CASE("A-hat beats the fixed weightings on its own batch") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GradientSample> samples;
    VarianceStats s;
    for (int i = 0; i < 32; ++i) {
      GradientSample x{random_vector(3, rng), rng.normal(0.0, 2.0), rng.normal(0.0, 2.0), rng.normal(0.0, 3.0)};
      s.accumulate(x.psi, x.v_hat, x.q_bar, x.target);
      samples.push_back(x);
    }
    const Eigen::Vector2d a = solve_lambda(s);
    const double at_a = sample_variance(samples, a);
    for (const Eigen::Vector2d& fixed : {Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, 0), Eigen::Vector2d(0, -1)})
      CHECK(at_a <= sample_variance(samples, fixed) + 1e-9);
  }
}

TEST_CASE("solve_lambda is invariant to duplicating every sample") {
  Rng rng(5);
  VarianceStats once;
  VarianceStats twice;
  for (int i = 0; i < 16; ++i) {
    const Eigen::VectorXd psi = random_vector(3, rng);
    const double v = rng.normal(0.0, 1.0);
    const double q = rng.normal(0.0, 1.0);
    const double g = rng.normal(0.0, 1.0);
    once.accumulate(psi, v, q, g);
    twice.accumulate(psi, v, q, g);
    twice.accumulate(psi, v, q, g);
  }
  CHECK((solve_lambda(once) - solve_lambda(twice)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve_lambda faults on singular or empty input") {
  VarianceStats empty;
  CHECK_THROWS_AS(solve_lambda(empty), ContractViolation);
  VarianceStats rank_one;
  rank_one.accumulate(Eigen::Vector2d(1, 0), 1.0, 1.0, 1.0);
  CHECK_THROWS_AS(solve_lambda(rank_one, 0.0), NumericalError);
  CHECK_NOTHROW(solve_lambda(rank_one, 1e-6));
  CHECK_THROWS_AS(solve_lambda(rank_one, -1.0), ContractViolation);
}

TEST_CASE("polyak update examples") {
  LambdaWeights current;
  current.a = Eigen::Vector2d(0.2, -0.7);
  const Eigen::Vector2d a_hat(1.5, 3.0);
  CHECK(polyak_update(current, a_hat, 1.0).a == current.a);
  CHECK(polyak_update(current, a_hat, 0.0).a == a_hat);
  const LambdaWeights next = polyak_update(LambdaWeights{}, Eigen::Vector2d::Zero(), 0.999);
  CHECK(std::abs(next.lambda1() + 0.4995) < 1e-15);
  CHECK(std::abs(next.lambda2() + 0.4995) < 1e-15);
  CHECK_THROWS_AS(polyak_update(current, a_hat, 1.5), ContractViolation);
}
