#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace survgen {

/// Right-continuous step survival function. S(t) = values[k] on
/// [times[k], times[k+1]) and stays at values.back() from times.back() up to
/// end_time. times[0] == 0 and values[0] == 1 always.
///
/// Curves estimated from data keep a copy of the sample so the constant-rate
/// extrapolation can count tail events and person-time exactly.
struct StepSurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;
  double end_time = 0.0;

  std::vector<double> sample_times;
  std::vector<std::uint8_t> sample_events;

  double at(double t) const;
  /// Left limit S(t-); differs from at(t) only at breakpoints.
  double at_left(double t) const;
  /// Exact integral of the step function over [a, b] (b capped at end_time
  /// contributions continue flat past end_time).
  double area(double a, double b) const;
};

/// Product-limit estimator. At each distinct event time, S <- S * (1 - d/n);
/// subjects censored at a time leave the risk set after that time's events.
StepSurvivalCurve kaplan_meier(std::span<const double> times,
                               std::span<const int> events);

/// Extends the curve to `to_time` with S(T) * exp(-rate * (t - T)). The rate
/// is events over person-time in the last 10% of [0, T] when the curve carries
/// its sample, otherwise it is read off the curve values in the same window.
/// The exponential tail is discretized into `steps` midpoint-sampled steps.
StepSurvivalCurve extrapolate_constant_rate(const StepSurvivalCurve& curve,
                                            double to_time, int steps = 256);

/// Mean difference (1/T) * integral_0^T (S_syn - S_real) dt with
/// T = real.end_time; the synthetic curve is extrapolated if it ends earlier.
double optimism(const StepSurvivalCurve& syn, const StepSurvivalCurve& real);

/// max(0, (T_real - T_syn) / T_real); the signed variant divides by
/// max(T_real, T_syn) and can go negative for long-sighted data.
double short_sightedness(const StepSurvivalCurve& syn,
                         const StepSurvivalCurve& real,
                         bool signed_variant = false);

/// Mean absolute difference between the curves over [0, T_real].
double km_divergence(const StepSurvivalCurve& syn, const StepSurvivalCurve& real);

/// Upper bounds on |optimism| from divergences between discrete event-time
/// distributions on a shared support.
struct OptimismBounds {
  double tv = 0.0;         // total variation
  double kl_min = 0.0;     // min over both KL orderings (may be +inf)
  double hellinger = 0.0;  // Hellinger distance

  double tv_bound = 0.0;                 // 2 * TV
  double pinsker_bound = 0.0;            // sqrt(2 * KL)
  double bretagnolle_huber_bound = 0.0;  // 2 * sqrt(1 - exp(-KL))
  double hellinger_bound = 0.0;          // 2 * sqrt(2) * H
};

OptimismBounds optimism_bounds(std::span<const double> p_syn,
                               std::span<const double> p_real);

/// Exact survival curve of a discrete event-time distribution: mass p[i] at
/// support[i] (support strictly increasing, positive).
StepSurvivalCurve curve_from_pmf(std::span<const double> support,
                                 std::span<const double> probs);

void write_curve_csv(const StepSurvivalCurve& curve, const std::string& path);

/// Self-contained SVG with both KM step curves.
std::string km_plot_svg(const StepSurvivalCurve& real, const StepSurvivalCurve& syn);

}  // namespace survgen
