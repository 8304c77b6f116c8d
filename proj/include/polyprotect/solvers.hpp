#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polyprotect/errors.hpp"
#include "polyprotect/linalg.hpp"

namespace polyprotect {

enum class Termination {
  gradient_tol,
  step_tol,
  objective_tol,
  max_iters,
  numerical_failure,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tol: return "gradient_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::objective_tol: return "objective_tol";
    case Termination::max_iters: return "max_iters";
    case Termination::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

/// Outcome of a solver run. `solution` is the best iterate seen (accepted
/// iterates only decrease the objective, so it is also the last accepted
/// one); for least squares `objective_value` is the residual sum of squares.
struct SolverReport {
  std::vector<double> solution;
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iters;
};

struct LeastSquaresProblem {
  std::function<std::vector<double>(std::span<const double>)> residual;
  std::function<SparseMatrix(std::span<const double>)> jacobian;
  std::vector<double> x0;
};

struct ScalarProblem {
  std::function<double(std::span<const double>)> objective;
  std::function<std::vector<double>(std::span<const double>)> gradient;
  std::vector<double> x0;
};

struct LmOptions {
  std::size_t max_iters = 500;
  double f_tol = 1e-10;
  double x_tol = 1e-10;
  double initial_damping = 1e-3;
  double damping_limit = 1e12;
  // debug hook: called with (iteration, residual sum of squares) per accept
  std::function<void(std::size_t, double)> on_iterate;
};

struct QnOptions {
  std::size_t max_iters = 500;
  double g_tol = 1e-8;
  double f_tol = 1e-10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  std::size_t max_line_search_trials = 50;
  // per-iteration step cap, relative to max(1, |x|): throttles the runaway
  // iterate growth that homogeneous (scale-degenerate) objectives induce
  double step_growth_cap = 10.0;
  // when set, the analytic gradient is compared against central differences
  // at x0 before solving and a mismatch raises NumericalFailure
  bool verify_gradient_at_x0 = false;
  double gradient_check_tol = 1e-4;
  double gradient_check_step = 1e-6;
  std::function<void(std::size_t, double)> on_iterate;
};

/// Central-difference gradient, one oracle shared by tests and the opt-in
/// pre-solve gradient check.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  if (!(h > 0.0)) throw ParameterError("finite difference step must be > 0");
  std::vector<double> xt(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = xt[i];
    xt[i] = xi + h;
    const double fp = f(xt);
    xt[i] = xi - h;
    const double fm = f(xt);
    xt[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NonFiniteError("objective is non-finite near the probe point");
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace detail {

/// Column scaling d_i = sum_j J(j,i)^2 with a floor relative to the largest
/// column. Near-dead columns (for example window slots whose high-exponent
/// derivative vanishes at small inputs) otherwise receive steps of order
/// 1/d_i, which no amount of multiplicative damping can tame.
inline std::vector<double> column_squared_norms(const SparseMatrix& jac) {
  std::vector<double> d(jac.n_cols, 0.0);
  for (const SparseRow& row : jac.rows) {
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      d[row.cols[t]] += row.vals[t] * row.vals[t];
    }
  }
  const double floor =
      std::max(1e-30, 1e-10 * max_element_value(d));
  for (double& x : d) x = std::max(x, floor);
  return d;
}

/// Half bandwidth of J * D^-1 * J^T estimated from row column-intervals.
/// Exact for the contiguous windows of the transform Jacobian; a safe
/// overestimate for arbitrary sparsity.
inline std::size_t gram_half_bandwidth(const SparseMatrix& jac) {
  const std::size_t k = jac.n_rows;
  std::vector<std::size_t> lo(k, 0), hi(k, 0);
  for (std::size_t j = 0; j < k; ++j) {
    const SparseRow& r = jac.rows[j];
    lo[j] = r.cols.empty() ? 0 : r.cols.front();
    hi[j] = r.cols.empty() ? 0 : r.cols.back();
  }
  std::size_t hb = 0;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t j2 = j + hb + 1; j2 < k; ++j2) {
      const bool overlap = !(jac.rows[j].cols.empty() ||
                             jac.rows[j2].cols.empty() || lo[j2] > hi[j] ||
                             lo[j] > hi[j2]);
      if (overlap) hb = j2 - j;
    }
  }
  return hb;
}

/// Scaled Gram matrix G = J D^-1 J^T in band storage.
inline BandMatrix scaled_gram(const SparseMatrix& jac,
                              std::span<const double> d, std::size_t hb) {
  const std::size_t k = jac.n_rows;
  BandMatrix g(k, hb);
  for (std::size_t j = 0; j < k; ++j) {
    const SparseRow& a = jac.rows[j];
    for (std::size_t dd = 0; dd <= hb && j + dd < k; ++dd) {
      const SparseRow& b = jac.rows[j + dd];
      double s = 0.0;
      std::size_t ta = 0, tb = 0;
      while (ta < a.cols.size() && tb < b.cols.size()) {
        if (a.cols[ta] < b.cols[tb]) {
          ++ta;
        } else if (a.cols[ta] > b.cols[tb]) {
          ++tb;
        } else {
          s += a.vals[ta] * b.vals[tb] / d[a.cols[ta]];
          ++ta;
          ++tb;
        }
      }
      g.at(dd, j) = s;
    }
  }
  return g;
}

}  // namespace detail

/// Damped least squares (Levenberg-Marquardt). Each step solves
///   (J^T J + lambda * diag(J^T J)) delta = -J^T r
/// through the equivalent k x k system on the scaled Gram matrix
/// J D^-1 J^T + lambda I, which for the window transform is narrowly banded.
/// The damping factor shrinks x1/3 on accepted steps and doubles on
/// rejections; rejections that push it past `damping_limit` end the run as a
/// numerical failure carrying the best iterate.
inline SolverReport solve_lm(const LeastSquaresProblem& problem,
                             const LmOptions& opts = {}) {
  std::vector<double> x = problem.x0;
  std::vector<double> r = problem.residual(x);
  if (!all_finite(x) || !all_finite(r)) {
    throw NumericalFailure("residual is non-finite at the initial guess");
  }
  double f = norm2_squared(r);

  SolverReport report;
  report.solution = x;
  report.objective_value = f;
  if (opts.max_iters == 0) {
    report.termination = Termination::max_iters;
    return report;
  }

  double lambda = opts.initial_damping;
  for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
    report.iterations = iter;

    const SparseMatrix jac = problem.jacobian(x);
    if (jac.n_rows != r.size() || jac.n_cols != x.size()) {
      throw DimensionError("jacobian dimensions do not match the problem");
    }
    const std::vector<double> d = detail::column_squared_norms(jac);
    const std::size_t hb = detail::gram_half_bandwidth(jac);
    const BandMatrix gram = detail::scaled_gram(jac, d, hb);

    // inner damping loop: retry with larger lambda until a step is accepted
    bool accepted = false;
    std::vector<double> x_new, r_new, delta;
    double f_new = f;
    while (!accepted) {
      BandMatrix damped = gram;
      damped.add_to_diagonal(lambda);
      bool ok = damped.cholesky_in_place();
      std::vector<double> y(r);
      if (ok) {
        damped.cholesky_solve(y);
        // delta = -D^-1 J^T y
        delta = jac.transpose_times(y);
        for (std::size_t i = 0; i < delta.size(); ++i) {
          delta[i] = -delta[i] / d[i];
        }
        x_new = x;
        for (std::size_t i = 0; i < x.size(); ++i) x_new[i] += delta[i];
        r_new = problem.residual(x_new);
        if (all_finite(r_new)) {
          f_new = norm2_squared(r_new);
          if (f_new < f) {
            accepted = true;
            break;
          }
        }
      }
      lambda *= 2.0;
      if (lambda > opts.damping_limit) {
        report.solution = x;
        report.objective_value = f;
        report.termination = Termination::numerical_failure;
        return report;
      }
    }

    const double step_norm = norm2(delta);
    const double x_norm = norm2(x);
    const double r_norm = std::sqrt(f);
    const double r_new_norm = std::sqrt(f_new);

    x = std::move(x_new);
    r = std::move(r_new);
    f = f_new;
    lambda = std::max(lambda / 3.0, 1e-300);
    report.solution = x;
    report.objective_value = f;
    if (opts.on_iterate) opts.on_iterate(iter, f);

    if (f == 0.0 || r_norm - r_new_norm <= opts.f_tol * r_norm) {
      report.converged = true;
      report.termination = Termination::objective_tol;
      return report;
    }
    if (step_norm <= opts.x_tol * (x_norm + opts.x_tol)) {
      report.converged = true;
      report.termination = Termination::step_tol;
      return report;
    }
  }
  report.termination = Termination::max_iters;
  return report;
}

namespace detail {

struct LineEval {
  double alpha;
  double phi;
  double dphi;
  std::vector<double> x;
  std::vector<double> grad;
};

}  // namespace detail

/// Quasi-Newton minimizer: dense BFGS update of the inverse Hessian with a
/// strong-Wolfe line search. Accepted iterates strictly decrease the
/// objective; the report carries the best (last accepted) iterate even when
/// the line search gives out.
inline SolverReport minimize_qn(const ScalarProblem& problem,
                                const QnOptions& opts = {}) {
  const std::size_t n = problem.x0.size();
  std::vector<double> x = problem.x0;
  double f = problem.objective(x);
  std::vector<double> g = problem.gradient(x);
  if (!all_finite(x) || !std::isfinite(f) || !all_finite(g)) {
    throw NumericalFailure("objective or gradient non-finite at x0");
  }
  if (g.size() != n) {
    throw DimensionError("gradient length does not match x0");
  }

  if (opts.verify_gradient_at_x0) {
    const std::vector<double> fd =
        finite_difference_gradient(problem.objective, x,
                                   opts.gradient_check_step);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(fd[i] - g[i]));
    const double scale = std::max(norm_inf(g), 1e-12);
    if (err / scale > opts.gradient_check_tol) {
      throw NumericalFailure(
          "analytic gradient disagrees with central differences at x0 "
          "(relative error " +
          std::to_string(err / scale) + ")");
    }
  }

  SolverReport report;
  report.solution = x;
  report.objective_value = f;
  if (opts.max_iters == 0) {
    report.termination = Termination::max_iters;
    return report;
  }

  // inverse Hessian approximation, dense row-major
  std::vector<double> H(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
  bool scale_next_update = true;

  std::vector<double> p(n), w(n);

  for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
    if (norm_inf(g) <= opts.g_tol) {
      report.converged = true;
      report.termination = Termination::gradient_tol;
      return report;
    }
    report.iterations = iter;

    // p = -H g
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &H[i * n];
      for (std::size_t j = 0; j < n; ++j) s += row[j] * g[j];
      p[i] = -s;
    }
    double dphi0 = dot(p, g);
    // restart on non-descent or near-orthogonal directions (degenerate H)
    if (!(dphi0 < 0.0) || -dphi0 < 1e-10 * norm2(p) * norm2(g)) {
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
      scale_next_update = true;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      dphi0 = -norm2_squared(g);
      if (dphi0 == 0.0) {
        report.converged = true;
        report.termination = Termination::gradient_tol;
        return report;
      }
    }

    // strong-Wolfe line search (bracket + bisection zoom)
    std::size_t trials = 0;
    auto evaluate = [&](double alpha) {
      detail::LineEval e;
      e.alpha = alpha;
      e.x = x;
      for (std::size_t i = 0; i < n; ++i) e.x[i] += alpha * p[i];
      e.phi = problem.objective(e.x);
      e.grad = problem.gradient(e.x);
      e.dphi = std::isfinite(e.phi) && all_finite(e.grad)
                   ? dot(e.grad, p)
                   : std::numeric_limits<double>::quiet_NaN();
      ++trials;
      return e;
    };
    const auto armijo = [&](const detail::LineEval& e) {
      return std::isfinite(e.phi) &&
             e.phi <= f + opts.wolfe_c1 * e.alpha * dphi0;
    };
    const auto curvature = [&](const detail::LineEval& e) {
      return std::isfinite(e.dphi) &&
             std::abs(e.dphi) <= -opts.wolfe_c2 * dphi0;
    };

    bool found = false;
    bool capped = false;
    detail::LineEval chosen;

    detail::LineEval prev;
    prev.alpha = 0.0;
    prev.phi = f;
    prev.dphi = dphi0;
    // never step further than step_growth_cap times the point scale in one
    // iteration; homogeneous objectives otherwise inflate the iterate norm
    // geometrically while the gradient decays toward a spurious stop
    const double alpha_cap =
        opts.step_growth_cap * (1.0 + norm2(x)) / std::max(norm2(p), 1e-300);
    double alpha = std::min(1.0, alpha_cap);
    // bracketing stage
    detail::LineEval lo, hi;
    bool bracketed = false;
    while (trials < opts.max_line_search_trials) {
      detail::LineEval e = evaluate(alpha);
      if (!armijo(e) || (trials > 1 && e.phi >= prev.phi)) {
        lo = prev;
        hi = e;
        bracketed = true;
        break;
      }
      if (curvature(e)) {
        chosen = std::move(e);
        found = true;
        break;
      }
      if (e.dphi >= 0.0) {
        lo = e;
        hi = prev;
        bracketed = true;
        break;
      }
      if (e.alpha >= alpha_cap) {
        // sufficient decrease holds but the slope is still steep at the cap:
        // take the capped step and discard the curvature model afterwards
        chosen = std::move(e);
        found = true;
        capped = true;
        break;
      }
      prev = std::move(e);
      alpha = std::min(alpha * 2.0, alpha_cap);
    }
    // zoom stage
    if (!found && bracketed) {
      while (trials < opts.max_line_search_trials) {
        const double mid = 0.5 * (lo.alpha + hi.alpha);
        if (std::abs(hi.alpha - lo.alpha) <=
            1e-14 * std::max(1.0, std::abs(lo.alpha))) {
          break;
        }
        detail::LineEval e = evaluate(mid);
        if (!armijo(e) || e.phi >= lo.phi) {
          hi = std::move(e);
        } else {
          if (curvature(e)) {
            chosen = std::move(e);
            found = true;
            break;
          }
          if (e.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = std::move(e);
        }
      }
      // a bracketed point with sufficient decrease is still usable even if
      // the curvature condition never triggered within the trial budget
      if (!found && lo.alpha > 0.0 && armijo(lo)) {
        chosen = std::move(lo);
        found = true;
      }
    }
    if (!found) {
      report.termination = Termination::numerical_failure;
      return report;
    }

    // BFGS update of H from the accepted step
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = chosen.x[i] - x[i];
      y[i] = chosen.grad[i] - g[i];
    }
    const double sy = dot(s, y);
    // A near-orthogonal search direction that also fails to make real
    // progress marks a degenerate curvature model. Scale-free objectives
    // (constant along rays) drive plain BFGS into exactly this regime: the
    // iterate norm inflates geometrically while the gradient decays toward
    // a spurious stop. Rebuilding H from scratch breaks the feedback loop;
    // healthy ill-conditioned runs never trip both conditions at once.
    const bool degenerate_direction =
        -dphi0 < 5e-3 * norm2(p) * norm2(g) &&
        f - chosen.phi < 0.5 * std::abs(f);
    const double f_prev = f;
    x = std::move(chosen.x);
    f = chosen.phi;
    g = std::move(chosen.grad);
    report.solution = x;
    report.objective_value = f;
    if (opts.on_iterate) opts.on_iterate(iter, f);

    if (std::abs(f_prev - f) <= opts.f_tol * std::max(std::abs(f_prev), 1e-300)) {
      report.converged = true;
      report.termination = Termination::objective_tol;
      return report;
    }

    if (capped || degenerate_direction) {
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
      scale_next_update = true;
    } else if (sy > 1e-12 * norm2(s) * norm2(y)) {
      if (scale_next_update) {
        const double yy = norm2_squared(y);
        if (yy > 0.0) {
          const double gamma = sy / yy;
          std::fill(H.begin(), H.end(), 0.0);
          for (std::size_t i = 0; i < n; ++i) H[i * n + i] = gamma;
        }
        scale_next_update = false;
      }
      const double rho = 1.0 / sy;
      // w = H y (H symmetric)
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = &H[i * n];
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * y[j];
        w[i] = acc;
      }
      const double beta = dot(y, w);
      const double coeff = rho * rho * beta + rho;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = &H[i * n];
        const double si = s[i];
        const double wi = w[i];
        for (std::size_t j = 0; j < n; ++j) {
          row[j] += coeff * si * s[j] - rho * (si * w[j] + wi * s[j]);
        }
      }
    }
  }
  report.termination = Termination::max_iters;
  return report;
}

}  // namespace polyprotect
