#pragma once

// Synthetic level series and scan traces, plus an independent bisection
// oracle for the quantum defect. Every generator is a pure function of its
// spec (seed included).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rydberg/errors.hpp"
#include "rydberg/lineshape.hpp"
#include "rydberg/random.hpp"
#include "rydberg/ritz.hpp"

namespace rydberg::synth {

struct SeriesSpec {
  double ionization_energy = 0.0;  ///< MHz
  ritz::RitzCoefficients coefficients;
  int n_min = 36;
  int n_max = 63;
  double rydberg = 0.0;      ///< MHz
  double noise_sigma = 0.0;  ///< Gaussian noise on each energy, MHz
  /// Sigma recorded on each level when noise_sigma is zero.
  double nominal_sigma = 1.0;
  std::uint64_t seed = 0;
  /// Defect convention used to generate energies.
  ritz::Convention convention = ritz::Convention::implicit;

  void validate() const {
    coefficients.validate();
    if (n_min < 1 || n_max < n_min) throw InvalidArgument("invalid n range");
    if (!(rydberg > 0)) throw InvalidArgument("Rydberg frequency must be > 0");
    if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise sigma must be >= 0");
    if (!(nominal_sigma > 0)) throw InvalidArgument("nominal sigma must be > 0");
    if (!std::isfinite(ionization_energy)) throw InvalidArgument("non-finite ionization energy");
  }
};

/// One level per n in [n_min, n_max]: series energy plus Gaussian noise.
inline std::vector<ritz::LevelRecord> synth_series(const SeriesSpec& spec) {
  spec.validate();
  random::Rng rng(spec.seed);
  std::vector<ritz::LevelRecord> out;
  out.reserve(static_cast<std::size_t>(spec.n_max - spec.n_min + 1));
  const double sigma = spec.noise_sigma > 0 ? spec.noise_sigma : spec.nominal_sigma;
  for (int n = spec.n_min; n <= spec.n_max; ++n) {
    double energy =
        ritz::series_energy(spec.convention, spec.ionization_energy, spec.coefficients, n, spec.rydberg);
    if (spec.noise_sigma > 0) energy += rng.normal(0.0, spec.noise_sigma);
    out.push_back({n, energy, sigma, std::nullopt});
  }
  return out;
}

struct ScanSpec {
  lineshape::LorentzianParams line;
  double start = -50.0;  ///< MHz
  double stop = 50.0;    ///< MHz
  double step = 1.0;     ///< MHz
  double dwell = 1.0;    ///< s per point
  double dark_rate = 0.0;  ///< counts/s, added to the line baseline
  std::uint64_t seed = 0;
  /// Replace Poisson draws by their expectation.
  bool expectation = false;

  void validate() const {
    if (!(line.fwhm > 0)) throw InvalidArgument("fwhm must be > 0");
    if (!(line.amplitude >= 0)) throw InvalidArgument("amplitude must be >= 0");
    if (!(line.baseline >= 0)) throw InvalidArgument("baseline must be >= 0");
    if (!(step > 0)) throw InvalidArgument("scan step must be > 0");
    if (!(stop > start)) throw InvalidArgument("scan stop must exceed start");
    if (!(dwell > 0)) throw InvalidArgument("dwell must be > 0");
    if (!(dark_rate >= 0)) throw InvalidArgument("dark rate must be >= 0");
  }

  /// Line parameters the generated trace follows, dark rate folded into the baseline.
  lineshape::LorentzianParams effective_line() const {
    auto p = line;
    p.baseline += dark_rate;
    return p;
  }

  /// Peak height over dark rate.
  double configured_signal_to_noise() const { return line.amplitude / dark_rate; }

  std::size_t point_count() const {
    return static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  }
};

inline lineshape::ScanTrace synth_scan(const ScanSpec& spec) {
  spec.validate();
  random::Rng rng(spec.seed);
  const auto line = spec.effective_line();
  lineshape::ScanTrace trace;
  const std::size_t count = spec.point_count();
  trace.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double f = spec.start + static_cast<double>(i) * spec.step;
    const double expected_counts = lineshape::lorentzian_model(line, f) * spec.dwell;
    const double counts =
        spec.expectation ? expected_counts : static_cast<double>(rng.poisson(expected_counts));
    trace.points.push_back({f, counts / spec.dwell});
  }
  return trace;
}

/// Quantum defect by bisection of R / (n - delta)^2 = E_i - E_n on (0, n).
/// Independent of the closed-form inversion in ritz::defect_from_energy.
inline double oracle_defect(int n, double energy, double ionization, double rydberg) {
  const double binding = ionization - energy;
  if (!(binding > 0))
    throw UnboundLevel("level n = " + std::to_string(n) + " is not below the ionization energy");
  auto excess = [&](double delta) {
    const double nstar = n - delta;
    return rydberg / (nstar * nstar) - binding;
  };
  double lo = 0.0, hi = static_cast<double>(n);
  if (excess(lo) > 1e-12 * binding)
    throw InvalidArgument("defect for n = " + std::to_string(n) + " lies below 0");
  for (int it = 0; it < 400 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (excess(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace rydberg::synth
