#pragma once

// Rydberg-Ritz mathematics: level energies, quantum defects, the t_n
// expansion parameter, explicit and self-consistent defect series, and the
// three series-fitting methods.
//
// All energies and frequencies are in MHz.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rydberg/errors.hpp"
#include "rydberg/optim.hpp"

namespace rydberg::ritz {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct RydbergConstant {
  double wavenumber;  ///< 1/m
  double frequency;   ///< MHz
};

/// wavenumber [1/m] * c, in MHz.
inline double rydberg_frequency_constant(double wavenumber_per_m) {
  if (!(wavenumber_per_m > 0) || !std::isfinite(wavenumber_per_m))
    throw InvalidArgument("Rydberg wavenumber must be finite and > 0");
  return wavenumber_per_m * kSpeedOfLight * 1e-6;
}

inline RydbergConstant make_rydberg_constant(double wavenumber_per_m) {
  return {wavenumber_per_m, rydberg_frequency_constant(wavenumber_per_m)};
}

struct LevelRecord {
  int n = 0;
  double energy = 0.0;  ///< from the ground-state centroid to the nP3/2 level
  double sigma = 1.0;   ///< 1-sigma
  /// Measured third-step frequency, when the record came from a level table.
  std::optional<double> third_step;
};

struct RitzCoefficients {
  double delta0 = 0.0;
  double delta2 = 0.0;  ///< a
  double delta4 = 0.0;  ///< b
  double delta6 = 0.0;  ///< c
  int term_count = 4;

  double operator[](int i) const {
    switch (i) {
      case 0: return delta0;
      case 1: return delta2;
      case 2: return delta4;
      case 3: return delta6;
      default: throw InvalidArgument("coefficient index out of range");
    }
  }
  double& operator[](int i) {
    switch (i) {
      case 0: return delta0;
      case 1: return delta2;
      case 2: return delta4;
      case 3: return delta6;
      default: throw InvalidArgument("coefficient index out of range");
    }
  }

  void validate() const {
    if (term_count < 1 || term_count > 4) throw InvalidArgument("term_count must be in 1..4");
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite((*this)[i])) throw InvalidArgument("non-finite Ritz coefficient");
      if (i >= term_count && (*this)[i] != 0.0)
        throw InvalidArgument("Ritz coefficient beyond term_count is populated");
    }
  }
};

// ---- single-level relations ----

/// E_n = E_i - R / (n - delta)^2
inline double level_energy(int n, double delta, double ionization, double rydberg) {
  const double nstar = n - delta;
  if (!(nstar > 0))
    throw InvalidQuantumNumber("n - delta = " + std::to_string(nstar) + " for n = " + std::to_string(n));
  return ionization - rydberg / (nstar * nstar);
}

/// delta = n - sqrt(R / (E_i - E_n))
inline double defect_from_energy(int n, double energy, double ionization, double rydberg) {
  const double binding = ionization - energy;
  if (!(binding > 0))
    throw UnboundLevel("level n = " + std::to_string(n) + " is not below the ionization energy");
  return n - std::sqrt(rydberg / binding);
}

/// t_n = (E_i - E_n) / R, equal to 1 / (n - delta)^2.
inline double t_parameter(double energy, double ionization, double rydberg) {
  const double binding = ionization - energy;
  if (!(binding > 0)) throw UnboundLevel("energy is not below the ionization energy");
  return binding / rydberg;
}

// ---- defect series ----

/// delta(n) = delta0 + a/(n-delta0)^2 + b/(n-delta0)^4 + c/(n-delta0)^6,
/// truncated at term_count terms.
inline double eval_defect_extended(const RitzCoefficients& c, int n) {
  const double nstar0 = n - c.delta0;
  if (!(nstar0 > 0))
    throw InvalidQuantumNumber("n = " + std::to_string(n) + " is not above delta0");
  const double t = 1.0 / (nstar0 * nstar0);
  double delta = c.delta0;
  double tp = 1.0;
  for (int i = 1; i < c.term_count; ++i) {
    tp *= t;
    delta += c[i] * tp;
  }
  return delta;
}

struct ImplicitDefect {
  double value;
  int iterations;
};

inline constexpr double kImplicitTolerance = 1e-12;
inline constexpr int kImplicitMaxIterations = 100;

namespace detail {

inline double implicit_rhs(const RitzCoefficients& c, int n, double delta) {
  const double nstar = n - delta;
  const double t = 1.0 / (nstar * nstar);
  double rhs = c.delta0;
  double tp = 1.0;
  for (int i = 1; i < c.term_count; ++i) {
    tp *= t;
    rhs += c[i] * tp;
  }
  return rhs;
}

}  // namespace detail

/// Fixed-point solution of delta = delta0 + sum_j d_2j (n - delta)^(-2j),
/// iterated from delta0 until successive values differ by less than tolerance.
inline ImplicitDefect solve_defect_implicit(const RitzCoefficients& c, int n,
                                            double tolerance = kImplicitTolerance) {
  if (!(n > c.delta0 + 1.0))
    throw InvalidQuantumNumber("n = " + std::to_string(n) + " must exceed delta0 + 1");
  double delta = c.delta0;
  for (int it = 1; it <= kImplicitMaxIterations; ++it) {
    const double next = detail::implicit_rhs(c, n, delta);
    if (!std::isfinite(next) || !(n - next > 0))
      throw DivergentSeries("iterate left the domain at n = " + std::to_string(n));
    if (std::abs(next - delta) < tolerance) return {next, it};
    delta = next;
  }
  throw DivergentSeries("no convergence in " + std::to_string(kImplicitMaxIterations) +
                        " iterations at n = " + std::to_string(n));
}

inline double eval_defect_implicit(const RitzCoefficients& c, int n,
                                   double tolerance = kImplicitTolerance) {
  return solve_defect_implicit(c, n, tolerance).value;
}

// ---- series fitting ----

enum class FitMethod : int {
  extended_ritz = 1,  ///< energies with delta0 in every denominator
  two_stage = 2,      ///< E_i from method 1, then the defect polynomial with E_i frozen
  modified_ritz = 3   ///< energies with the self-consistent defect
};

enum class Convention { explicit_delta0, implicit };

inline Convention convention_of(FitMethod m) {
  return m == FitMethod::modified_ritz ? Convention::implicit : Convention::explicit_delta0;
}

inline FitMethod method_from_int(int m) {
  if (m < 1 || m > 3) throw InvalidArgument("fit method must be 1, 2 or 3");
  return static_cast<FitMethod>(m);
}

/// Level energy under a defect convention.
inline double series_energy(Convention conv, double ionization, const RitzCoefficients& c, int n,
                            double rydberg) {
  const double delta =
      conv == Convention::implicit ? eval_defect_implicit(c, n) : eval_defect_extended(c, n);
  return level_energy(n, delta, ionization, rydberg);
}

struct SeriesFit {
  double ionization_energy = 0.0;
  RitzCoefficients coefficients;
  /// 1-sigma errors in parameter order (E_i, delta0, delta2, ...).
  optim::Vector errors;
  optim::Matrix covariance;
  FitMethod method = FitMethod::modified_ritz;
  double rydberg = 0.0;
  bool converged = false;
  bool weighted = false;
  std::vector<int> n;
  /// Measured minus fitted energy, MHz.
  std::vector<double> residuals;

  optim::Index parameter_count() const { return 1 + coefficients.term_count; }
  double residual_rms() const {
    double s = 0.0;
    for (double r : residuals) s += r * r;
    return residuals.empty() ? 0.0 : std::sqrt(s / static_cast<double>(residuals.size()));
  }
};

namespace detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Parameter layout (dE_i, delta0, delta2, ...) where dE_i = E_i - reference.
inline RitzCoefficients coefficients_from(const optim::Vector& p, int first, int term_count) {
  RitzCoefficients c;
  c.term_count = term_count;
  for (int i = 0; i < term_count; ++i) c[i] = p[first + i];
  return c;
}

/// Defect and its gradient with respect to (delta0, delta2, ...) under a
/// convention. Returns NaN instead of throwing so trial points outside the
/// domain are simply rejected by the solver.
struct DefectEval {
  double delta;
  std::array<double, 4> grad;
};

inline DefectEval defect_with_gradient(Convention conv, const RitzCoefficients& c, int n) noexcept {
  DefectEval out{kNaN, {kNaN, kNaN, kNaN, kNaN}};
  if (conv == Convention::explicit_delta0) {
    const double nstar0 = n - c.delta0;
    if (!(nstar0 > 0)) return out;
    const double t = 1.0 / (nstar0 * nstar0);
    const double dt = 2.0 / (nstar0 * nstar0 * nstar0);  // dt/d(delta0)
    double delta = c.delta0, d_delta0 = 1.0, tp = 1.0;
    for (int j = 1; j < c.term_count; ++j) {
      d_delta0 += c[j] * j * tp * dt;
      tp *= t;
      delta += c[j] * tp;
      out.grad[static_cast<std::size_t>(j)] = tp;
    }
    out.delta = delta;
    out.grad[0] = d_delta0;
    return out;
  }
  if (!(n > c.delta0 + 1.0)) return out;
  double delta = c.delta0;
  bool ok = false;
  for (int it = 0; it < kImplicitMaxIterations; ++it) {
    const double next = implicit_rhs(c, n, delta);
    if (!std::isfinite(next) || !(n - next > 0)) return out;
    const bool done = std::abs(next - delta) < kImplicitTolerance;
    delta = next;
    if (done) {
      ok = true;
      break;
    }
  }
  if (!ok) return out;
  // Implicit differentiation of delta = F(delta; theta).
  const double nstar = n - delta;
  const double t = 1.0 / (nstar * nstar);
  const double dt = 2.0 / (nstar * nstar * nstar);
  double dF_ddelta = 0.0, tp = 1.0;
  for (int j = 1; j < c.term_count; ++j) {
    dF_ddelta += c[j] * j * tp * dt;
    tp *= t;
    out.grad[static_cast<std::size_t>(j)] = tp;
  }
  const double denom = 1.0 - dF_ddelta;
  if (!(std::abs(denom) > 1e-12)) return out;
  out.grad[0] = 1.0 / denom;
  for (int j = 1; j < c.term_count; ++j) out.grad[static_cast<std::size_t>(j)] /= denom;
  out.delta = delta;
  return out;
}

struct LevelArrays {
  std::vector<int> n;
  optim::Vector shifted_energy;  ///< E_n - reference
  optim::Vector sigma;
  double reference = 0.0;
};

inline LevelArrays arrange(std::span<const LevelRecord> levels) {
  std::vector<LevelRecord> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.n < b.n; });
  LevelArrays out;
  const auto m = static_cast<optim::Index>(sorted.size());
  out.reference = -std::numeric_limits<double>::infinity();
  for (const auto& l : sorted) out.reference = std::max(out.reference, l.energy);
  out.shifted_energy.resize(m);
  out.sigma.resize(m);
  for (optim::Index i = 0; i < m; ++i) {
    const auto& l = sorted[static_cast<std::size_t>(i)];
    if (l.n < 1) throw InvalidArgument("principal quantum number must be >= 1");
    if (!std::isfinite(l.energy)) throw InvalidArgument("non-finite level energy");
    if (!(l.sigma > 0) || !std::isfinite(l.sigma)) throw InvalidArgument("level sigma must be > 0");
    out.n.push_back(l.n);
    out.shifted_energy[i] = l.energy - out.reference;
    out.sigma[i] = l.sigma;
  }
  return out;
}

/// Start values for (E_i - reference, delta0): exact one-term Ritz through the
/// two highest levels.
inline std::pair<double, double> initial_ionization(const LevelArrays& lv, double rydberg) {
  const std::size_t hi = lv.n.size() - 1, lo = hi - 1;
  const int n1 = lv.n[lo], n2 = lv.n[hi];
  const double gap = lv.shifted_energy[static_cast<optim::Index>(hi)] -
                     lv.shifted_energy[static_cast<optim::Index>(lo)];
  auto f = [&](double d) {
    return rydberg / ((n1 - d) * (n1 - d)) - rydberg / ((n2 - d) * (n2 - d)) - gap;
  };
  double a = -10.0 * n2, b = n1 - 1e-9;
  if (n1 != n2 && gap > 0 && f(a) < 0 && f(b) > 0) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      (f(mid) < 0 ? a : b) = mid;
    }
    const double delta0 = 0.5 * (a + b);
    const double nstar = n2 - delta0;
    return {lv.shifted_energy[static_cast<optim::Index>(hi)] + rydberg / (nstar * nstar), delta0};
  }
  // Fallback: assume delta near 2.64 for the series limit, then read delta0 off the top level.
  const double top = lv.shifted_energy[static_cast<optim::Index>(hi)];
  const double nstar = n2 + 1 - 2.64;
  const double ei = top + rydberg / (nstar * nstar);
  return {ei, n2 - std::sqrt(rydberg / (ei - top))};
}

/// Energy-residual problem for methods 1 and 3 over (dE_i, delta0, ...).
inline optim::FitProblem energy_problem(const LevelArrays& lv, Convention conv, int term_count,
                                        double rydberg, bool weighted) {
  optim::FitProblem problem;
  problem.parameter_count = 1 + term_count;
  problem.residual_count = static_cast<optim::Index>(lv.n.size());
  problem.residuals = [&lv, conv, term_count, rydberg](const optim::Vector& p) {
    const RitzCoefficients c = coefficients_from(p, 1, term_count);
    optim::Vector r(static_cast<optim::Index>(lv.n.size()));
    for (std::size_t i = 0; i < lv.n.size(); ++i) {
      const DefectEval d = defect_with_gradient(conv, c, lv.n[i]);
      const double nstar = lv.n[i] - d.delta;
      r[static_cast<optim::Index>(i)] =
          (p[0] - rydberg / (nstar * nstar)) - lv.shifted_energy[static_cast<optim::Index>(i)];
    }
    return r;
  };
  problem.jacobian = [&lv, conv, term_count, rydberg](const optim::Vector& p) {
    const RitzCoefficients c = coefficients_from(p, 1, term_count);
    optim::Matrix j(static_cast<optim::Index>(lv.n.size()), 1 + term_count);
    for (std::size_t i = 0; i < lv.n.size(); ++i) {
      const auto row = static_cast<optim::Index>(i);
      const DefectEval d = defect_with_gradient(conv, c, lv.n[i]);
      const double nstar = lv.n[i] - d.delta;
      const double dE_ddelta = -2.0 * rydberg / (nstar * nstar * nstar);
      j(row, 0) = 1.0;
      for (int k = 0; k < term_count; ++k)
        j(row, 1 + k) = dE_ddelta * d.grad[static_cast<std::size_t>(k)];
    }
    return j;
  };
  if (weighted) problem.weights = lv.sigma.cwiseInverse();
  return problem;
}

inline void check_physical(double ionization, std::span<const LevelRecord> levels) {
  for (const auto& l : levels)
    if (!(ionization > l.energy))
      throw NonphysicalFit("fitted ionization energy is not above level n = " + std::to_string(l.n));
}

}  // namespace detail

/// Energy of level n predicted by a series fit, with a 1-sigma uncertainty
/// propagated to first order through the fit covariance.
inline std::pair<double, double> predict_level(const SeriesFit& fit, int n) {
  const RitzCoefficients& c = fit.coefficients;
  const Convention conv = convention_of(fit.method);
  if (!(n > c.delta0 + 1.0))
    throw InvalidQuantumNumber("n = " + std::to_string(n) + " must exceed delta0 + 1");
  const double delta =
      conv == Convention::implicit ? eval_defect_implicit(c, n) : eval_defect_extended(c, n);
  const double energy = level_energy(n, delta, fit.ionization_energy, fit.rydberg);

  const detail::DefectEval d = detail::defect_with_gradient(conv, c, n);
  const double nstar = n - d.delta;
  const optim::Index k = fit.parameter_count();
  optim::Vector g(k);
  g[0] = 1.0;
  for (int i = 0; i < c.term_count; ++i)
    g[1 + i] = -2.0 * fit.rydberg / (nstar * nstar * nstar) * d.grad[static_cast<std::size_t>(i)];
  double var = 0.0;
  if (fit.covariance.rows() == k && fit.covariance.cols() == k) var = g.dot(fit.covariance * g);
  return {energy, std::sqrt(std::max(var, 0.0))};
}

/// Fit a level series with one of the three methods. Free parameters are
/// (E_i, delta0, delta2, ...) with term_count defect coefficients.
inline SeriesFit fit_series(std::span<const LevelRecord> levels, FitMethod method, double rydberg,
                            const optim::FitOptions& options = {}, bool weighted = false,
                            int term_count = 4) {
  if (term_count < 1 || term_count > 4) throw InvalidArgument("term_count must be in 1..4");
  if (!(rydberg > 0)) throw InvalidArgument("Rydberg frequency must be > 0");
  const auto free = static_cast<std::size_t>(1 + term_count);
  if (levels.size() < free + 3)
    throw InsufficientData("need at least " + std::to_string(free + 3) + " levels for " +
                           std::to_string(free) + " free parameters, got " +
                           std::to_string(levels.size()));
  const detail::LevelArrays lv = detail::arrange(levels);
  if (lv.n.front() == lv.n.back()) throw InsufficientData("all levels share the same n");

  const auto [ei0, delta00] = detail::initial_ionization(lv, rydberg);
  optim::Vector start = optim::Vector::Zero(static_cast<optim::Index>(free));
  start[0] = ei0;
  start[1] = delta00;

  SeriesFit out;
  out.method = method;
  out.rydberg = rydberg;
  out.weighted = weighted;
  out.n = lv.n;

  if (method == FitMethod::extended_ritz || method == FitMethod::modified_ritz) {
    const optim::FitProblem problem =
        detail::energy_problem(lv, convention_of(method), term_count, rydberg, weighted);
    const optim::FitResult res = optim::minimize_least_squares(problem, start, options);
    out.ionization_energy = lv.reference + res.parameters[0];
    out.coefficients = detail::coefficients_from(res.parameters, 1, term_count);
    out.covariance = res.covariance;
    out.errors = res.parameter_errors;
    out.converged = res.converged;
  } else {
    // Stage 1: E_i from the method-1 energy fit.
    const SeriesFit stage1 =
        fit_series(levels, FitMethod::extended_ritz, rydberg, options, weighted, term_count);
    const double ei_shift = stage1.ionization_energy - lv.reference;
    detail::check_physical(stage1.ionization_energy, levels);

    // Stage 2: per-level defects against the frozen E_i, fitted by the explicit series.
    const auto m = static_cast<optim::Index>(lv.n.size());
    optim::Vector measured(m), sigma_delta(m);
    for (optim::Index i = 0; i < m; ++i) {
      const double binding = ei_shift - lv.shifted_energy[i];
      const int n = lv.n[static_cast<std::size_t>(i)];
      measured[i] = n - std::sqrt(rydberg / binding);
      sigma_delta[i] = lv.sigma[i] * 0.5 * std::sqrt(rydberg) * std::pow(binding, -1.5);
    }
    optim::FitProblem problem;
    problem.parameter_count = term_count;
    problem.residual_count = m;
    problem.residuals = [&lv, &measured, term_count](const optim::Vector& p) {
      const RitzCoefficients c = detail::coefficients_from(p, 0, term_count);
      optim::Vector r(measured.size());
      for (optim::Index i = 0; i < r.size(); ++i)
        r[i] = measured[i] -
               detail::defect_with_gradient(Convention::explicit_delta0, c, lv.n[static_cast<std::size_t>(i)]).delta;
      return r;
    };
    problem.jacobian = [&lv, term_count](const optim::Vector& p) {
      const RitzCoefficients c = detail::coefficients_from(p, 0, term_count);
      optim::Matrix j(static_cast<optim::Index>(lv.n.size()), term_count);
      for (std::size_t i = 0; i < lv.n.size(); ++i) {
        const auto d = detail::defect_with_gradient(Convention::explicit_delta0, c, lv.n[i]);
        for (int k = 0; k < term_count; ++k)
          j(static_cast<optim::Index>(i), k) = -d.grad[static_cast<std::size_t>(k)];
      }
      return j;
    };
    if (weighted) problem.weights = sigma_delta.cwiseInverse();

    optim::Vector start2(term_count);
    for (int i = 0; i < term_count; ++i) start2[i] = stage1.coefficients[i];
    const optim::FitResult res = optim::minimize_least_squares(problem, start2, options);

    out.ionization_energy = stage1.ionization_energy;
    out.coefficients = detail::coefficients_from(res.parameters, 0, term_count);
    const auto k = static_cast<optim::Index>(free);
    out.covariance = optim::Matrix::Zero(k, k);
    out.covariance(0, 0) = stage1.covariance(0, 0);
    out.covariance.bottomRightCorner(term_count, term_count) = res.covariance;
    out.errors = out.covariance.diagonal().cwiseSqrt();
    out.converged = stage1.converged && res.converged;
  }

  detail::check_physical(out.ionization_energy, levels);

  // Residuals in energy, MHz, under the method's own convention.
  const Convention conv = convention_of(method);
  out.residuals.reserve(lv.n.size());
  for (std::size_t i = 0; i < lv.n.size(); ++i) {
    const detail::DefectEval d = detail::defect_with_gradient(conv, out.coefficients, lv.n[i]);
    const double nstar = lv.n[i] - d.delta;
    const double model_shifted = (out.ionization_energy - lv.reference) - rydberg / (nstar * nstar);
    out.residuals.push_back(lv.shifted_energy[static_cast<optim::Index>(i)] - model_shifted);
  }
  return out;
}

inline SeriesFit fit_series(std::span<const LevelRecord> levels, int method, double rydberg,
                            const optim::FitOptions& options = {}, bool weighted = false,
                            int term_count = 4) {
  return fit_series(levels, method_from_int(method), rydberg, options, weighted, term_count);
}

}  // namespace rydberg::ritz
