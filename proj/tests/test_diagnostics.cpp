#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sas/core.hpp"
#include "sas/diagnostics.hpp"

using namespace sas;

TEST_CASE("constant schedules fail the square-summability condition") {
  const StepSizeSchedule constant{1e-3, 1.0, 0.0};
  CHECK(constant.at(0) == 1e-3);
  CHECK(constant.at(100000) == 1e-3);
  const ScheduleCheck check = check_step_size_conditions(constant);
  CHECK(check.sum_diverges);
  CHECK_FALSE(check.square_sum_finite);
  CHECK_FALSE(check.satisfied());
}

TEST_CASE("exponent boundaries of the Robbins-Monro conditions") {
  CHECK(check_step_size_conditions({1.0, 1.0, 1.0}).satisfied());
  CHECK(check_step_size_conditions({1.0, 1.0, 0.75}).satisfied());
  CHECK_FALSE(check_step_size_conditions({1.0, 1.0, 0.5}).satisfied());
  CHECK_FALSE(check_step_size_conditions({1.0, 1.0, 1.5}).sum_diverges);
  CHECK(check_step_size_conditions({1.0, 1.0, 1.5}).square_sum_finite);
}

TEST_CASE("schedule values decay as stated") {
  const StepSizeSchedule s{0.1, 10.0, 1.0};
  CHECK(s.at(0) == 0.1);
  CHECK(std::abs(s.at(10) - 0.05) < 1e-15);
  CHECK(std::abs(s.at(90) - 0.01) < 1e-15);
}

TEST_CASE("partial sums agree with the declared classification") {
  // For exponent 2 the partial sums settle; for exponent 1 they keep growing
  // roughly like log t.
  const StepSizeSchedule fast{1.0, 1.0, 2.0};
  const StepSizeSchedule harmonic{1.0, 1.0, 1.0};
  double fast_a = 0.0, fast_b = 0.0, harm_a = 0.0, harm_b = 0.0;
  for (std::size_t t = 0; t < 200000; ++t) {
    fast_b += fast.at(t);
    harm_b += harmonic.at(t);
    if (t + 1 == 100000) {
      fast_a = fast_b;
      harm_a = harm_b;
    }
  }
  CHECK(fast_b - fast_a < 1e-4);
  CHECK(std::abs((harm_b - harm_a) - std::log(2.0)) < 1e-4);
}

TEST_CASE("invalid schedules are rejected") {
  CHECK_THROWS_AS(check_step_size_conditions({0.0, 1.0, 1.0}), ContractViolation);
  CHECK_THROWS_AS(check_step_size_conditions({1.0, 0.0, 1.0}), ContractViolation);
  CHECK_THROWS_AS(check_step_size_conditions({1.0, 1.0, -0.1}), ContractViolation);
}

TEST_CASE("gradient norm trend on a decreasing series") {
  std::vector<double> norms;
  for (int i = 0; i < 100; ++i) norms.push_back(100.0 - i);
  const GradientNormTrend trend = gradient_norm_trend(norms);
  CHECK(trend.early_mean == doctest::Approx(95.5));
  CHECK(trend.late_mean == doctest::Approx(5.5));
  CHECK(trend.slope == doctest::Approx(-1.0));
  CHECK(trend.decreasing());
}

TEST_CASE("gradient norm trend on flat and short series") {
  const std::vector<double> flat(50, 2.0);
  const GradientNormTrend trend = gradient_norm_trend(flat);
  CHECK(trend.slope == 0.0);
  CHECK_FALSE(trend.decreasing());
  // Fewer points than one window still uses a single point per end.
  const std::vector<double> two{3.0, 1.0};
  const GradientNormTrend short_trend = gradient_norm_trend(two);
  CHECK(short_trend.early_mean == 3.0);
  CHECK(short_trend.late_mean == 1.0);
  CHECK(short_trend.slope == -2.0);
  CHECK_THROWS_AS(gradient_norm_trend(std::vector<double>{1.0}), ContractViolation);
  CHECK_THROWS_AS(gradient_norm_trend(flat, 0.6), ContractViolation);
}
