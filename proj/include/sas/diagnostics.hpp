#ifndef SAS_DIAGNOSTICS_HPP
#define SAS_DIAGNOSTICS_HPP

#include <cstddef>
#include <span>

namespace sas {

/// eta_t = eta0 / (1 + t / scale)^exponent. exponent = 0 is a constant rate.
struct StepSizeSchedule {
  double eta0 = 1e-3;
  double scale = 1.0;
  double exponent = 0.0;

  double at(std::size_t t) const;
};

/// Robbins-Monro conditions for the schedule family above:
/// sum eta_t diverges iff exponent <= 1, sum eta_t^2 converges iff exponent > 1/2.
struct ScheduleCheck {
  bool sum_diverges = false;
  bool square_sum_finite = false;

  bool satisfied() const { return sum_diverges && square_sum_finite; }
};

ScheduleCheck check_step_size_conditions(const StepSizeSchedule& schedule);

/// Compares the mean of the first and last `window_fraction` of a series of
/// gradient (or update) norms and fits a least-squares slope over the
/// whole series.
struct GradientNormTrend {
  double early_mean = 0.0;
  double late_mean = 0.0;
  double slope = 0.0;

  bool decreasing() const { return late_mean < early_mean; }
};

GradientNormTrend gradient_norm_trend(std::span<const double> norms, double window_fraction = 0.1);

}  // namespace sas

#endif  // SAS_DIAGNOSTICS_HPP
