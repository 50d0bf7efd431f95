#pragma once

// Allan deviation of fixed-cadence frequency readings.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rydberg/errors.hpp"

namespace rydberg::stability {

struct FrequencySeries {
  std::vector<double> samples;  ///< MHz, one per sample_period
  double sample_period = 1.0;   ///< s
  double reference = 0.0;       ///< nominal frequency, MHz

  void validate() const {
    if (samples.size() < 3) throw InvalidArgument("frequency series needs at least 3 samples");
    if (!(sample_period > 0) || !std::isfinite(sample_period))
      throw InvalidArgument("sample period must be > 0");
    for (double s : samples)
      if (!std::isfinite(s)) throw InvalidArgument("non-finite frequency sample");
  }
};

struct AllanPoint {
  double tau;        ///< s
  double deviation;  ///< MHz
  long multiple;     ///< tau / sample_period
  long pair_count;   ///< number of averaged differences
};

struct AllanCurve {
  std::vector<AllanPoint> points;
};

enum class Estimator { overlapping, non_overlapping };

/// Powers of two times the sample period, up to a quarter of the record.
inline std::vector<long> default_multiples(std::size_t sample_count) {
  std::vector<long> out;
  for (long m = 1; static_cast<std::size_t>(4 * m) <= sample_count; m *= 2) out.push_back(m);
  if (out.empty()) out.push_back(1);
  return out;
}

/// sigma(tau) = sqrt(<(ybar_{k+m} - ybar_k)^2> / 2) over windows of m samples.
/// Samples are referred to the first one before summing, so a constant offset
/// that is exactly representable leaves the result bit-identical.
inline AllanCurve allan_deviation(const FrequencySeries& series, std::span<const long> multiples,
                                  Estimator estimator = Estimator::overlapping) {
  series.validate();
  const std::size_t count = series.samples.size();
  for (std::size_t i = 0; i < multiples.size(); ++i) {
    const long m = multiples[i];
    if (m < 1) throw InvalidArgument("tau multiples must be >= 1");
    if (i > 0 && m <= multiples[i - 1]) throw InvalidArgument("tau multiples must be strictly increasing");
    if (static_cast<std::size_t>(2 * m) > count)
      throw InsufficientSpan(m, "needs " + std::to_string(2 * m) + " samples, series has " +
                                    std::to_string(count));
  }

  // prefix[i] = sum of (y_j - y_0) for j < i
  std::vector<double> prefix(count + 1, 0.0);
  const double origin = series.samples.front();
  for (std::size_t i = 0; i < count; ++i) prefix[i + 1] = prefix[i] + (series.samples[i] - origin);

  AllanCurve curve;
  for (const long m : multiples) {
    const auto w = static_cast<std::size_t>(m);
    const std::size_t stride = estimator == Estimator::overlapping ? 1 : w;
    double sum_sq = 0.0;
    long pairs = 0;
    for (std::size_t k = 0; k + 2 * w <= count; k += stride) {
      const double first = prefix[k + w] - prefix[k];
      const double second = prefix[k + 2 * w] - prefix[k + w];
      const double diff = (second - first) / static_cast<double>(m);
      sum_sq += diff * diff;
      ++pairs;
    }
    const double dev = std::sqrt(sum_sq / (2.0 * static_cast<double>(pairs)));
    curve.points.push_back({static_cast<double>(m) * series.sample_period, dev, m, pairs});
  }
  return curve;
}

inline AllanCurve allan_deviation(const FrequencySeries& series,
                                  Estimator estimator = Estimator::overlapping) {
  const auto m = default_multiples(series.samples.size());
  return allan_deviation(series, m, estimator);
}

/// Least-squares slope of log(deviation) against log(tau).
inline double log_log_slope(const AllanCurve& curve) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(curve.points.size());
  if (curve.points.size() < 2) throw InvalidArgument("slope needs at least two points");
  for (const auto& p : curve.points) {
    if (!(p.deviation > 0)) throw InvalidArgument("slope needs positive deviations");
    const double x = std::log(p.tau), y = std::log(p.deviation);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace rydberg::stability
