#include "survgen/km.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace survgen {

namespace {

void check_curve(const StepSurvivalCurve& c) {
  if (c.times.empty() || c.times.size() != c.values.size())
    throw std::invalid_argument("malformed survival curve");
  if (c.times.front() != 0.0 || c.values.front() != 1.0)
    throw std::invalid_argument("survival curve must start at (0, 1)");
}

std::size_t segment_of(const std::vector<double>& times, double t) {
  // Largest k with times[k] <= t.
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

}  // namespace

double StepSurvivalCurve::at(double t) const {
  if (t < times.front()) return 1.0;
  return values[segment_of(times, t)];
}

double StepSurvivalCurve::at_left(double t) const {
  if (t <= times.front()) return 1.0;
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it != times.end() && *it == t)
    return it == times.begin() ? 1.0 : values[static_cast<std::size_t>(it - times.begin()) - 1];
  return at(t);
}

double StepSurvivalCurve::area(double a, double b) const {
  if (b <= a) return 0.0;
  double total = 0.0;
  std::size_t k = segment_of(times, a);
  double lo = a;
  while (lo < b) {
    const double hi = (k + 1 < times.size()) ? std::min(times[k + 1], b) : b;
    total += values[k] * (hi - lo);
    lo = hi;
    ++k;
    if (k >= times.size()) {
      if (lo < b) total += values.back() * (b - lo);
      break;
    }
  }
  return total;
}

StepSurvivalCurve kaplan_meier(std::span<const double> times,
                               std::span<const int> events) {
  const std::size_t n = times.size();
  if (n == 0 || events.size() != n)
    throw std::invalid_argument("kaplan_meier: empty or misaligned input");
  for (std::size_t i = 0; i < n; ++i)
    if (!(times[i] >= 0.0)) throw std::invalid_argument("kaplan_meier: negative time");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return times[a] < times[b];
  });

  StepSurvivalCurve curve;
  curve.times = {0.0};
  curve.values = {1.0};
  double s = 1.0;
  std::size_t at_risk = n;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    std::size_t d = 0, removed = 0;
    while (i < n && times[order[i]] == t) {
      if (events[order[i]] == 1) ++d;
      ++removed;
      ++i;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      if (t == 0.0) {
        curve.values[0] = s;  // event exactly at the origin
      } else {
        curve.times.push_back(t);
        curve.values.push_back(s);
      }
    }
    at_risk -= removed;
  }
  curve.end_time = times[order.back()];
  curve.sample_times.assign(times.begin(), times.end());
  curve.sample_events.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    curve.sample_events[j] = static_cast<std::uint8_t>(events[j]);
  return curve;
}

StepSurvivalCurve extrapolate_constant_rate(const StepSurvivalCurve& curve,
                                            double to_time, int steps) {
  check_curve(curve);
  if (to_time <= curve.end_time) return curve;

  const double T = curve.end_time;
  const double window = 0.1 * T;
  const double w0 = T - window;

  double rate = 0.0;
  if (!curve.sample_times.empty() && window > 0.0) {
    double d = 0.0, person_time = 0.0;
    for (std::size_t i = 0; i < curve.sample_times.size(); ++i) {
      const double t = curve.sample_times[i];
      if (t >= w0 && t <= T && curve.sample_events[i]) d += 1.0;
      person_time += std::max(0.0, std::min(t, T) - w0);
    }
    rate = (d > 0.0 && person_time > 0.0) ? d / person_time : 0.0;
  } else if (window > 0.0) {
    const double s0 = curve.at(w0);
    const double s1 = curve.at(T);
    if (s0 > 0.0 && s1 > 0.0 && s1 < s0) rate = std::log(s0 / s1) / window;
  }

  StepSurvivalCurve out = curve;
  const double s_end = curve.values.back();
  if (rate > 0.0 && s_end > 0.0) {
    const double h = (to_time - T) / steps;
    for (int k = 0; k < steps; ++k) {
      const double seg_start = T + k * h;
      const double mid = seg_start + 0.5 * h;
      out.times.push_back(seg_start);
      out.values.push_back(s_end * std::exp(-rate * (mid - T)));
    }
  }
  out.end_time = to_time;
  return out;
}

namespace {

// Exact integral of f(S_syn - S_real) over [0, T] on merged breakpoints;
// f = identity or absolute value.
double integrate_difference(const StepSurvivalCurve& syn,
                            const StepSurvivalCurve& real, double T,
                            bool absolute) {
  std::vector<double> knots;
  knots.reserve(syn.times.size() + real.times.size() + 2);
  for (double t : syn.times)
    if (t < T) knots.push_back(t);
  for (double t : real.times)
    if (t < T) knots.push_back(t);
  knots.push_back(0.0);
  knots.push_back(T);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double width = knots[k + 1] - knots[k];
    const double diff = syn.at(knots[k]) - real.at(knots[k]);
    total += width * (absolute ? std::fabs(diff) : diff);
  }
  return total;
}

std::pair<StepSurvivalCurve, double> align(const StepSurvivalCurve& syn,
                                           const StepSurvivalCurve& real) {
  check_curve(syn);
  check_curve(real);
  const double T = real.end_time;
  if (T <= 0.0) throw std::invalid_argument("real curve has zero horizon");
  if (syn.end_time < T) return {extrapolate_constant_rate(syn, T), T};
  return {syn, T};
}

}  // namespace

double optimism(const StepSurvivalCurve& syn, const StepSurvivalCurve& real) {
  const auto [syn_ext, T] = align(syn, real);
  return integrate_difference(syn_ext, real, T, /*absolute=*/false) / T;
}

double km_divergence(const StepSurvivalCurve& syn, const StepSurvivalCurve& real) {
  const auto [syn_ext, T] = align(syn, real);
  return integrate_difference(syn_ext, real, T, /*absolute=*/true) / T;
}

double short_sightedness(const StepSurvivalCurve& syn,
                         const StepSurvivalCurve& real, bool signed_variant) {
  if (real.end_time <= 0.0)
    throw std::invalid_argument("real curve has zero horizon");
  const double t_real = real.end_time;
  const double t_syn = syn.end_time;
  if (signed_variant) return (t_real - t_syn) / std::max(t_real, t_syn);
  return std::max(0.0, (t_real - t_syn) / t_real);
}

StepSurvivalCurve curve_from_pmf(std::span<const double> support,
                                 std::span<const double> probs) {
  if (support.empty() || support.size() != probs.size())
    throw std::invalid_argument("curve_from_pmf: bad input");
  StepSurvivalCurve c;
  c.times = {0.0};
  c.values = {1.0};
  double s = 1.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] <= 0.0 || (i > 0 && support[i] <= support[i - 1]))
      throw std::invalid_argument("curve_from_pmf: support must be positive increasing");
    s -= probs[i];
    c.times.push_back(support[i]);
    c.values.push_back(std::max(0.0, s));
  }
  c.end_time = support.back();
  return c;
}

OptimismBounds optimism_bounds(std::span<const double> p_syn,
                               std::span<const double> p_real) {
  if (p_syn.size() != p_real.size() || p_syn.empty())
    throw std::invalid_argument("optimism_bounds: distributions must share support");
  const double inf = std::numeric_limits<double>::infinity();

  auto kl = [&](std::span<const double> p, std::span<const double> q) {
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      if (q[i] <= 0.0) return inf;
      d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(0.0, d);
  };

  OptimismBounds b;
  double tv = 0.0, h2 = 0.0;
  for (std::size_t i = 0; i < p_syn.size(); ++i) {
    tv += std::fabs(p_syn[i] - p_real[i]);
    const double ds = std::sqrt(std::max(0.0, p_syn[i])) -
                      std::sqrt(std::max(0.0, p_real[i]));
    h2 += ds * ds;
  }
  b.tv = 0.5 * tv;
  b.hellinger = std::sqrt(0.5 * h2);
  b.kl_min = std::min(kl(p_syn, p_real), kl(p_real, p_syn));

  b.tv_bound = 2.0 * b.tv;
  b.pinsker_bound = std::isinf(b.kl_min) ? inf : std::sqrt(2.0 * b.kl_min);
  b.bretagnolle_huber_bound =
      std::isinf(b.kl_min) ? 2.0 : 2.0 * std::sqrt(1.0 - std::exp(-b.kl_min));
  b.hellinger_bound = 2.0 * std::sqrt(2.0) * b.hellinger;
  return b;
}

void write_curve_csv(const StepSurvivalCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "time,survival\n";
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    out << fmt(curve.times[i]) << ',' << fmt(curve.values[i]) << '\n';
  out << fmt(curve.end_time) << ',' << fmt(curve.values.back()) << '\n';
}

std::string km_plot_svg(const StepSurvivalCurve& real, const StepSurvivalCurve& syn) {
  const int width = 640, height = 420;
  const double mx = 60, my = 30;  // margins
  const double pw = width - 2 * mx, ph = height - 2 * my;
  const double t_max = std::max(real.end_time, syn.end_time);

  auto x_of = [&](double t) { return mx + (t_max > 0 ? t / t_max : 0.0) * pw; };
  auto y_of = [&](double s) { return my + (1.0 - s) * ph; };

  auto path_of = [&](const StepSurvivalCurve& c) {
    std::ostringstream p;
    p << "M " << x_of(0) << ' ' << y_of(1.0);
    for (std::size_t i = 1; i < c.times.size(); ++i) {
      p << " H " << x_of(c.times[i]);
      p << " V " << y_of(c.values[i]);
    }
    p << " H " << x_of(c.end_time);
    return p.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "' viewBox='0 0 " << width << ' ' << height
      << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n";
  // axes
  svg << "<line x1='" << mx << "' y1='" << my << "' x2='" << mx << "' y2='"
      << my + ph << "' stroke='black'/>\n"
      << "<line x1='" << mx << "' y1='" << my + ph << "' x2='" << mx + pw
      << "' y2='" << my + ph << "' stroke='black'/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double s = k / 5.0;
    svg << "<text x='" << mx - 8 << "' y='" << y_of(s) + 4
        << "' font-size='11' text-anchor='end'>" << s << "</text>\n";
    const double t = s * t_max;
    std::ostringstream lbl;
    lbl.precision(4);
    lbl << t;
    svg << "<text x='" << x_of(t) << "' y='" << my + ph + 16
        << "' font-size='11' text-anchor='middle'>" << lbl.str() << "</text>\n";
  }
  svg << "<path d='" << path_of(real)
      << "' fill='none' stroke='#1f77b4' stroke-width='1.8'/>\n"
      << "<path d='" << path_of(syn)
      << "' fill='none' stroke='#d62728' stroke-width='1.8'/>\n"
      << "<text x='" << mx + 12 << "' y='" << my + 14
      << "' font-size='12' fill='#1f77b4'>real</text>\n"
      << "<text x='" << mx + 12 << "' y='" << my + 30
      << "' font-size='12' fill='#d62728'>synthetic</text>\n"
      << "<text x='" << mx + pw / 2 << "' y='" << height - 4
      << "' font-size='12' text-anchor='middle'>time</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace survgen
