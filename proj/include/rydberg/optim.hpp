#pragma once

// Damped (Levenberg-Marquardt) nonlinear least squares with numerical or
// analytic Jacobians and covariance estimation. Every fit in the library goes
// through minimize_least_squares().

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydberg/errors.hpp"

namespace rydberg::optim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

using ResidualFunction = std::function<Vector(const Vector&)>;
using JacobianFunction = std::function<Matrix(const Vector&)>;

enum class CovarianceMode {
  scaled,        ///< s^2 (J^T J)^-1 with s^2 = |r|^2 / (m - k)
  trusted_sigma  ///< (J^T J)^-1, weights are taken as exact 1/sigma
};

struct FitProblem {
  ResidualFunction residuals;
  Index parameter_count = 0;
  Index residual_count = 0;
  std::optional<Vector> lower;
  std::optional<Vector> upper;
  /// Per-residual weights (1/sigma). Applied to residuals and Jacobian rows.
  std::optional<Vector> weights;
  /// Analytic Jacobian of the unweighted residuals. Numerical when empty.
  JacobianFunction jacobian;
};

struct FitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  double absolute_tolerance = 1e-12;
  double finite_difference_step = 1e-7;
  CovarianceMode covariance = CovarianceMode::scaled;

  void validate() const {
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!(relative_tolerance > 0) || !(absolute_tolerance > 0) || !(finite_difference_step > 0))
      throw InvalidArgument("tolerances and finite-difference step must be > 0");
  }
};

struct FitResult {
  Vector parameters;
  Vector parameter_errors;
  Matrix covariance;
  /// Weighted residuals at the solution.
  Vector residuals;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Objective (weighted sum of squares) after the start and after every accepted step.
  std::vector<double> objective_history;
};

namespace detail {

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

inline void validate_problem(const FitProblem& problem) {
  if (!problem.residuals) throw InvalidArgument("fit problem has no residual function");
  const Index k = problem.parameter_count;
  const Index m = problem.residual_count;
  if (k < 1) throw InvalidArgument("parameter_count must be >= 1");
  if (m < k) throw InvalidArgument("residual_count must be >= parameter_count");
  if (problem.weights) {
    const Vector& w = *problem.weights;
    if (w.size() != m) throw InvalidArgument("weights length differs from residual_count");
    for (Index i = 0; i < m; ++i)
      if (!std::isfinite(w[i]) || !(w[i] > 0))
        throw InvalidArgument("weights must be finite and positive");
  }
  if (problem.lower && problem.lower->size() != k)
    throw InvalidArgument("lower bound length differs from parameter_count");
  if (problem.upper && problem.upper->size() != k)
    throw InvalidArgument("upper bound length differs from parameter_count");
  if (problem.lower && problem.upper)
    for (Index i = 0; i < k; ++i)
      if ((*problem.lower)[i] > (*problem.upper)[i])
        throw InvalidArgument("lower bound exceeds upper bound");
}

inline Vector clamp(const FitProblem& problem, Vector p) {
  if (problem.lower) p = p.cwiseMax(*problem.lower);
  if (problem.upper) p = p.cwiseMin(*problem.upper);
  return p;
}

inline Vector evaluate(const FitProblem& problem, const Vector& p) {
  Vector r = problem.residuals(p);
  if (r.size() != problem.residual_count)
    throw InvalidArgument("residual function returned " + std::to_string(r.size()) +
                          " values, expected " + std::to_string(problem.residual_count));
  if (problem.weights) r = r.cwiseProduct(*problem.weights);
  return r;
}

}  // namespace detail

/// Forward-difference Jacobian. The step for parameter i is
/// relative_step * max(|p_i|, 1).
inline Matrix numerical_jacobian(const ResidualFunction& f, const Vector& params,
                                 double relative_step, const Vector& base_residuals) {
  if (!(relative_step > 0)) throw InvalidArgument("relative_step must be > 0");
  if (!base_residuals.allFinite())
    throw InvalidArgument("residuals are not finite at the base point");
  Matrix jac(base_residuals.size(), params.size());
  Vector probe = params;
  for (Index i = 0; i < params.size(); ++i) {
    const double h = relative_step * std::max(std::abs(params[i]), 1.0);
    probe[i] = params[i] + h;
    const double actual_h = probe[i] - params[i];
    Vector r = f(probe);
    probe[i] = params[i];
    if (r.size() != base_residuals.size())
      throw EvaluationError(static_cast<std::size_t>(i), "residual length changed at probe point");
    if (!r.allFinite())
      throw EvaluationError(static_cast<std::size_t>(i), "non-finite residual at probe point");
    jac.col(i) = (r - base_residuals) / actual_h;
  }
  return jac;
}

inline Matrix numerical_jacobian(const ResidualFunction& f, const Vector& params,
                                 double relative_step) {
  return numerical_jacobian(f, params, relative_step, f(params));
}

/// Covariance of the fitted parameters from the (weighted) Jacobian and
/// residuals at the solution. In scaled mode s^2 = |r|^2 / max(m - k, 1).
inline Matrix parameter_covariance(const Matrix& jacobian, const Vector& residuals,
                                   Index parameter_count,
                                   CovarianceMode mode = CovarianceMode::scaled) {
  const Index m = jacobian.rows();
  const Index k = parameter_count;
  if (jacobian.cols() != k) throw InvalidArgument("jacobian column count differs from parameter_count");
  if (residuals.size() != m) throw InvalidArgument("residual length differs from jacobian rows");
  if (!jacobian.allFinite() || !residuals.allFinite())
    throw InvalidArgument("non-finite jacobian or residuals");

  // Unit-norm columns keep the SVD rank test independent of parameter units.
  Vector norms = jacobian.colwise().norm().transpose();
  for (Index j = 0; j < k; ++j)
    if (norms[j] == 0.0) {
      Vector dir = Vector::Zero(k);
      dir[j] = 1.0;
      throw DegenerateProblem("J^T J is singular; null-space direction " + detail::format_vector(dir));
    }
  const Matrix normalized = jacobian * norms.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(normalized, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv.size() < k || sv[k - 1] <= 1e-13 * sv[0]) {
    Vector dir = svd.matrixV().col(k - 1).cwiseQuotient(norms);
    dir.normalize();
    throw DegenerateProblem("J^T J is rank deficient; null-space direction " +
                            detail::format_vector(dir));
  }
  const Matrix& v = svd.matrixV();
  const Matrix inner = v * sv.array().square().inverse().matrix().asDiagonal() * v.transpose();
  Matrix cov = norms.cwiseInverse().asDiagonal() * inner * norms.cwiseInverse().asDiagonal();

  if (mode == CovarianceMode::scaled) {
    const double dof = static_cast<double>(std::max<Index>(m - k, 1));
    cov *= residuals.squaredNorm() / dof;
  }
  return 0.5 * (cov + cov.transpose());
}

/// Levenberg-Marquardt in column-scaled variables: damping starts at
/// 1e-3 * trace(Js^T Js) / k, is divided by 10 on accepted steps and
/// multiplied by 10 on rejected ones. Accepted steps never increase the
/// objective.
inline FitResult minimize_least_squares(const FitProblem& problem, const Vector& initial,
                                        const FitOptions& options = {}) {
  detail::validate_problem(problem);
  options.validate();
  const Index k = problem.parameter_count;
  if (initial.size() != k) throw InvalidStart("initial vector has wrong length");
  if (!initial.allFinite()) throw InvalidStart("initial parameters are not finite");

  const double rtol = options.relative_tolerance;
  const double atol = options.absolute_tolerance;
  constexpr double kMaxDamping = 1e300;

  auto weighted_jacobian = [&](const Vector& p, const Vector& weighted_r) -> Matrix {
    Matrix jac;
    if (problem.jacobian) {
      jac = problem.jacobian(p);
      if (jac.rows() != problem.residual_count || jac.cols() != k)
        throw InvalidArgument("analytic jacobian has wrong shape");
      if (problem.weights) jac = problem.weights->asDiagonal() * jac;
    } else {
      ResidualFunction weighted = [&](const Vector& q) { return detail::evaluate(problem, q); };
      jac = numerical_jacobian(weighted, p, options.finite_difference_step, weighted_r);
    }
    for (Index j = 0; j < k; ++j)
      if (!jac.col(j).allFinite()) throw EvaluationError(static_cast<std::size_t>(j), "non-finite jacobian");
    return jac;
  };

  FitResult result;
  Vector p = detail::clamp(problem, initial);
  Vector r = detail::evaluate(problem, p);
  if (!r.allFinite()) throw InvalidStart("residuals are not finite at the initial point");
  double cost = r.squaredNorm();
  result.objective_history.push_back(cost);

  Vector diag = Vector::Zero(k);
  double lambda = -1.0;
  bool converged = std::sqrt(cost) <= atol;
  int iter = 0;

  while (!converged && iter < options.max_iterations) {
    ++iter;
    const Matrix jac = weighted_jacobian(p, r);
    for (Index j = 0; j < k; ++j) {
      diag[j] = std::max(diag[j], jac.col(j).norm());
      if (diag[j] == 0.0) diag[j] = 1.0;
    }
    const Matrix js = jac * diag.cwiseInverse().asDiagonal();
    if (lambda < 0) lambda = 1e-3 * js.squaredNorm() / static_cast<double>(k);

    const Vector g = js.transpose() * r;

    // Parameters pinned at a bound with the descent direction pointing out of
    // the box sit out this iteration.
    std::vector<Index> free;
    for (Index j = 0; j < k; ++j) {
      const bool pinned_low = problem.lower && p[j] <= (*problem.lower)[j] && g[j] > 0;
      const bool pinned_high = problem.upper && p[j] >= (*problem.upper)[j] && g[j] < 0;
      if (!pinned_low && !pinned_high) free.push_back(j);
    }
    const Index kf = static_cast<Index>(free.size());

    const double rnorm = r.norm();
    double gmax = 0.0;
    for (Index j : free) {
      const double cn = js.col(j).norm();
      if (cn > 0 && rnorm > 0) gmax = std::max(gmax, std::abs(g[j]) / (cn * rnorm));
    }
    if (kf == 0 || gmax <= atol) {
      converged = true;
      break;
    }

    Matrix augmented(js.rows() + kf, kf);
    Vector rhs = Vector::Zero(js.rows() + kf);
    for (Index c = 0; c < kf; ++c) augmented.col(c).head(js.rows()) = js.col(free[static_cast<std::size_t>(c)]);
    rhs.head(js.rows()) = -r;

    while (true) {
      if (lambda > kMaxDamping)
        throw DegenerateProblem("normal equations remain singular at maximum damping");
      augmented.bottomRows(kf) = std::sqrt(lambda) * Matrix::Identity(kf, kf);
      const Vector free_step = augmented.householderQr().solve(rhs);
      if (!free_step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      Vector scaled_step = Vector::Zero(k);
      for (Index c = 0; c < kf; ++c) scaled_step[free[static_cast<std::size_t>(c)]] = free_step[c];
      const Vector trial = detail::clamp(problem, p + scaled_step.cwiseQuotient(diag));
      const double step_norm = diag.cwiseProduct(trial - p).norm();
      const double x_norm = diag.cwiseProduct(p).norm();

      Vector trial_r = detail::evaluate(problem, trial);
      const bool finite = trial_r.allFinite();
      const double trial_cost = finite ? trial_r.squaredNorm() : std::numeric_limits<double>::infinity();
      // (r - r')(r + r') resolves decreases far below the rounding of |r|^2 itself.
      const double reduction = finite ? (r - trial_r).dot(r + trial_r) : -1.0;

      if (reduction > 0 && trial_cost <= cost) {
        const double decrease = reduction / cost;
        p = trial;
        r = std::move(trial_r);
        cost = trial_cost;
        result.objective_history.push_back(cost);
        lambda = std::max(lambda / 10.0, std::numeric_limits<double>::min());
        if (std::sqrt(cost) <= atol || (decrease <= rtol && step_norm <= rtol * (x_norm + atol)))
          converged = true;
        break;
      }
      lambda *= 10.0;
      // No decrease is available at a step this small: stationary at working precision.
      if (step_norm <= rtol * (x_norm + atol)) {
        converged = true;
        break;
      }
    }
  }

  const Matrix jac = weighted_jacobian(p, r);
  result.covariance = parameter_covariance(jac, r, k, options.covariance);
  result.parameter_errors = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  result.parameters = std::move(p);
  result.residual_norm = std::sqrt(cost);
  result.residuals = std::move(r);
  result.iterations = iter;
  result.converged = converged;
  return result;
}

}  // namespace rydberg::optim
