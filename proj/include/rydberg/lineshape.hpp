#pragma once

// Single Lorentzian line on a flat baseline, and its fit to a scan trace.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rydberg/errors.hpp"
#include "rydberg/optim.hpp"

namespace rydberg::lineshape {

struct ScanPoint {
  double frequency;  ///< MHz
  double rate;       ///< counts per second
};

struct ScanTrace {
  std::vector<ScanPoint> points;
  /// Optional 1-sigma rate uncertainty, one per point.
  std::optional<std::vector<double>> rate_sigma;

  std::size_t size() const noexcept { return points.size(); }
};

inline constexpr std::size_t kMinScanPoints = 8;

/// Structural checks shared by the parser and the fitter. The minimum length
/// is only enforced when fitting.
inline void validate_trace(const ScanTrace& trace, std::size_t min_points = kMinScanPoints) {
  if (trace.points.size() < min_points)
    throw InvalidArgument("scan trace has " + std::to_string(trace.points.size()) +
                          " points, need at least " + std::to_string(min_points));
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    const auto& pt = trace.points[i];
    if (!std::isfinite(pt.frequency) || !std::isfinite(pt.rate))
      throw InvalidArgument("non-finite value at scan point " + std::to_string(i));
    if (pt.rate < 0) throw InvalidArgument("negative rate at scan point " + std::to_string(i));
    if (i > 0 && !(pt.frequency > trace.points[i - 1].frequency))
      throw InvalidArgument("scan frequencies are not strictly increasing at point " + std::to_string(i));
  }
  if (trace.rate_sigma) {
    if (trace.rate_sigma->size() != trace.points.size())
      throw InvalidArgument("rate uncertainty count differs from point count");
    for (double s : *trace.rate_sigma)
      if (!std::isfinite(s) || !(s > 0)) throw InvalidArgument("rate uncertainties must be positive");
  }
}

struct LorentzianParams {
  double center = 0.0;     ///< MHz
  double fwhm = 1.0;       ///< MHz
  double amplitude = 1.0;  ///< peak height above baseline, counts/s
  double baseline = 0.0;   ///< counts/s

  void validate() const {
    if (!(fwhm > 0)) throw InvalidArgument("fwhm must be > 0");
    if (!(amplitude > 0)) throw InvalidArgument("amplitude must be > 0");
    if (!(baseline >= 0)) throw InvalidArgument("baseline must be >= 0");
  }
};

struct LineFitResult {
  LorentzianParams params;
  LorentzianParams errors;  ///< 1-sigma, same layout as params
  double residual_norm = 0.0;
  bool converged = false;
  double signal_to_noise = 0.0;
  /// Center lies within one fitted FWHM of a scan endpoint.
  bool edge_of_scan = false;
  int iterations = 0;
};

/// Height-parameterized Lorentzian: baseline + amplitude at the center,
/// baseline + amplitude / 2 at center +- fwhm / 2.
inline double lorentzian_model(const LorentzianParams& p, double f) noexcept {
  const double half = 0.5 * p.fwhm;
  const double d = f - p.center;
  return p.baseline + p.amplitude * (half * half) / (d * d + half * half);
}

namespace detail {

inline double mean_spacing(const ScanTrace& trace) {
  return (trace.points.back().frequency - trace.points.front().frequency) /
         static_cast<double>(trace.points.size() - 1);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline optim::Vector to_vector(const LorentzianParams& p) {
  optim::Vector v(4);
  v << p.center, p.fwhm, p.amplitude, p.baseline;
  return v;
}

inline LorentzianParams from_vector(const optim::Vector& v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace detail

/// Heuristic start for the line fit: baseline from the quietest quarter of the
/// samples, peak at the maximum, width from the outermost half-maximum
/// crossings (linear interpolation), floored at two sample spacings.
inline LorentzianParams initial_guess(const ScanTrace& trace) {
  validate_trace(trace);
  const auto& pts = trace.points;
  const std::size_t n = pts.size();

  std::vector<double> rates;
  rates.reserve(n);
  for (const auto& p : pts) rates.push_back(p.rate);
  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t quarter = std::max<std::size_t>(1, n / 4);
  const double baseline = detail::median({sorted.begin(), sorted.begin() + static_cast<long>(quarter)});

  const auto peak = static_cast<std::size_t>(std::max_element(rates.begin(), rates.end()) - rates.begin());
  const double amplitude = rates[peak] - baseline;
  if (!(amplitude > 0)) throw NoLineFound("trace has no peak above its baseline");

  const double level = baseline + 0.5 * amplitude;
  auto crossing = [&](std::size_t below, std::size_t above) {
    const double f0 = pts[below].frequency, f1 = pts[above].frequency;
    const double r0 = rates[below], r1 = rates[above];
    return f0 + (level - r0) / (r1 - r0) * (f1 - f0);
  };

  std::optional<double> left, right;
  for (std::size_t i = 0; i + 1 <= peak && !left; ++i)
    if (rates[i] < level && rates[i + 1] >= level) left = crossing(i, i + 1);
  for (std::size_t i = n - 1; i > peak && !right; --i)
    if (rates[i] < level && rates[i - 1] >= level) right = crossing(i, i - 1);

  const double center = pts[peak].frequency;
  double fwhm;
  if (left && right)
    fwhm = *right - *left;
  else if (left)
    fwhm = 2.0 * (center - *left);
  else if (right)
    fwhm = 2.0 * (*right - center);
  else
    fwhm = pts.back().frequency - pts.front().frequency;
  fwhm = std::max(fwhm, 2.0 * detail::mean_spacing(trace));

  return {center, fwhm, amplitude, std::max(baseline, 0.0)};
}

inline constexpr double kDefaultDarkRateFloor = 0.3;  // counts/s

/// Least-squares Lorentzian fit seeded by initial_guess(). Per-point rate
/// uncertainties, when present, weight the fit.
inline LineFitResult fit_line(const ScanTrace& trace, const optim::FitOptions& options = {},
                              double dark_rate_floor = kDefaultDarkRateFloor) {
  const LorentzianParams guess = initial_guess(trace);
  const auto& pts = trace.points;
  const auto m = static_cast<optim::Index>(pts.size());

  // Fit in frequencies relative to the guessed center: absolute optical
  // frequencies (~1e8 MHz) would swamp the center's finite-difference step.
  const double origin = guess.center;
  optim::Vector freq(m), rate(m);
  for (optim::Index i = 0; i < m; ++i) {
    freq[i] = pts[static_cast<std::size_t>(i)].frequency - origin;
    rate[i] = pts[static_cast<std::size_t>(i)].rate;
  }

  optim::FitProblem problem;
  problem.parameter_count = 4;
  problem.residual_count = m;
  problem.residuals = [freq, rate](const optim::Vector& v) {
    const LorentzianParams p = detail::from_vector(v);
    optim::Vector r(freq.size());
    for (optim::Index i = 0; i < freq.size(); ++i) r[i] = lorentzian_model(p, freq[i]) - rate[i];
    return r;
  };
  problem.jacobian = [freq](const optim::Vector& v) {
    const double half = 0.5 * v[1];
    optim::Matrix j(freq.size(), 4);
    for (optim::Index i = 0; i < freq.size(); ++i) {
      const double d = freq[i] - v[0];
      const double den = d * d + half * half;
      const double shape = half * half / den;
      j(i, 0) = v[2] * shape * 2.0 * d / den;
      j(i, 1) = v[2] * half * d * d / (den * den);
      j(i, 2) = shape;
      j(i, 3) = 1.0;
    }
    return j;
  };
  const double spacing = detail::mean_spacing(trace);
  optim::Vector lower(4);
  lower << -std::numeric_limits<double>::infinity(), 1e-6 * spacing, 1e-12 * guess.amplitude, 0.0;
  problem.lower = lower;
  if (trace.rate_sigma) {
    optim::Vector w(m);
    for (optim::Index i = 0; i < m; ++i) w[i] = 1.0 / (*trace.rate_sigma)[static_cast<std::size_t>(i)];
    problem.weights = w;
  }

  LorentzianParams start = guess;
  start.center = 0.0;
  const optim::FitResult fit = optim::minimize_least_squares(problem, detail::to_vector(start), options);

  LineFitResult out;
  out.params = detail::from_vector(fit.parameters);
  out.params.center += origin;
  out.errors = detail::from_vector(fit.parameter_errors);
  out.residual_norm = fit.residual_norm;
  out.converged = fit.converged;
  out.iterations = fit.iterations;

  // Noise from the unweighted residuals away from the line, falling back to all of them.
  const optim::Vector raw = problem.residuals(fit.parameters);
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (optim::Index i = 0; i < m; ++i)
    if (std::abs(freq[i] - fit.parameters[0]) > 2.0 * out.params.fwhm) {
      sum_sq += raw[i] * raw[i];
      ++count;
    }
  if (count < 3) {
    sum_sq = raw.squaredNorm();
    count = static_cast<std::size_t>(m);
  }
  const double noise = std::sqrt(sum_sq / static_cast<double>(count));
  out.signal_to_noise = out.params.amplitude / std::max(noise, dark_rate_floor);

  out.edge_of_scan = out.params.center - pts.front().frequency < out.params.fwhm ||
                     pts.back().frequency - out.params.center < out.params.fwhm;
  return out;
}

}  // namespace rydberg::lineshape
