#include "sas/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "sas/core.hpp"

namespace sas {

double StepSizeSchedule::at(std::size_t t) const {
  return eta0 / std::pow(1.0 + static_cast<double>(t) / scale, exponent);
}

ScheduleCheck check_step_size_conditions(const StepSizeSchedule& schedule) {
  if (!(schedule.eta0 > 0.0) || !(schedule.scale > 0.0) || schedule.exponent < 0.0)
    throw ContractViolation("check_step_size_conditions: invalid schedule");
  ScheduleCheck check;
  check.sum_diverges = schedule.exponent <= 1.0;
  check.square_sum_finite = schedule.exponent > 0.5;
  return check;
}

GradientNormTrend gradient_norm_trend(std::span<const double> norms, double window_fraction) {
  if (norms.size() < 2) throw ContractViolation("gradient_norm_trend: need at least two points");
  if (!(window_fraction > 0.0 && window_fraction <= 0.5))
    throw ContractViolation("gradient_norm_trend: window_fraction must lie in (0, 0.5]");
  const std::size_t n = norms.size();
  const std::size_t window =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(window_fraction * static_cast<double>(n))));
  GradientNormTrend trend;
  for (std::size_t i = 0; i < window; ++i) {
    trend.early_mean += norms[i];
    trend.late_mean += norms[n - window + i];
  }
  trend.early_mean /= static_cast<double>(window);
  trend.late_mean /= static_cast<double>(window);

  const double mean_x = static_cast<double>(n - 1) / 2.0;
  double mean_y = 0.0;
  for (double y : norms) mean_y += y;
  mean_y /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (norms[i] - mean_y);
    sxx += dx * dx;
  }
  trend.slope = sxy / sxx;
  return trend;
}

}  // namespace sas
