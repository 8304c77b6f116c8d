#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "polyprotect/errors.hpp"

namespace polyprotect {

/// One sparse row: ascending column indices with matching values.
struct SparseRow {
  std::vector<std::size_t> cols;
  std::vector<double> vals;
};

/// Row-sparse rectangular matrix. Rows of the polynomial-window Jacobian have
/// at most m entries; generic dense problems simply fill every column.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<SparseRow> rows;

  /// y = A^T * u  (length n_cols)
  std::vector<double> transpose_times(std::span<const double> u) const {
    std::vector<double> y(n_cols, 0.0);
    for (std::size_t j = 0; j < n_rows; ++j) {
      const SparseRow& r = rows[j];
      for (std::size_t t = 0; t < r.cols.size(); ++t) {
        y[r.cols[t]] += r.vals[t] * u[j];
      }
    }
    return y;
  }

  /// y = A * x  (length n_rows)
  std::vector<double> times(std::span<const double> x) const {
    std::vector<double> y(n_rows, 0.0);
    for (std::size_t j = 0; j < n_rows; ++j) {
      const SparseRow& r = rows[j];
      double s = 0.0;
      for (std::size_t t = 0; t < r.cols.size(); ++t) {
        s += r.vals[t] * x[r.cols[t]];
      }
      y[j] = s;
    }
    return y;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(n_rows,
                                       std::vector<double>(n_cols, 0.0));
    for (std::size_t j = 0; j < n_rows; ++j) {
      const SparseRow& r = rows[j];
      for (std::size_t t = 0; t < r.cols.size(); ++t) {
        d[j][r.cols[t]] = r.vals[t];
      }
    }
    return d;
  }
};

inline SparseMatrix sparse_from_dense(
    const std::vector<std::vector<double>>& dense) {
  SparseMatrix m;
  m.n_rows = dense.size();
  m.n_cols = dense.empty() ? 0 : dense.front().size();
  m.rows.resize(m.n_rows);
  for (std::size_t j = 0; j < m.n_rows; ++j) {
    for (std::size_t i = 0; i < m.n_cols; ++i) {
      if (dense[j][i] != 0.0) {
        m.rows[j].cols.push_back(i);
        m.rows[j].vals.push_back(dense[j][i]);
      }
    }
  }
  return m;
}

/// Symmetric band matrix, lower storage by diagonal: at(d, j) holds A(j+d, j)
/// for 0 <= d <= half_bandwidth. The damped Gram matrices of the window
/// transform are narrowly banded (windows only overlap near neighbours), so
/// factorizations cost O(n * hb^2) instead of O(n^3).
class BandMatrix {
public:
  BandMatrix(std::size_t n, std::size_t half_bandwidth)
      : n_(n),
        hb_(std::min(half_bandwidth, n == 0 ? 0 : n - 1)),
        data_((hb_ + 1) * n, 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t half_bandwidth() const { return hb_; }

  double& at(std::size_t d, std::size_t j) { return data_[d * n_ + j]; }
  double at(std::size_t d, std::size_t j) const { return data_[d * n_ + j]; }

  void add_to_diagonal(double value) {
    for (std::size_t j = 0; j < n_; ++j) data_[j] += value;
  }

  /// In-place lower Cholesky within the band. Returns false when the matrix
  /// is not numerically positive definite.
  bool cholesky_in_place() {
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t t0 = j > hb_ ? j - hb_ : 0;
      double s = at(0, j);
      for (std::size_t t = t0; t < j; ++t) {
        const double l = at(j - t, t);
        s -= l * l;
      }
      if (!(s > 0.0) || !std::isfinite(s)) return false;
      const double diag = std::sqrt(s);
      at(0, j) = diag;
      const std::size_t imax = std::min(j + hb_, n_ - 1);
      for (std::size_t i = j + 1; i <= imax; ++i) {
        const std::size_t u0 = i > hb_ ? i - hb_ : 0;
        double v = at(i - j, j);
        for (std::size_t t = std::max(t0, u0); t < j; ++t) {
          v -= at(i - t, t) * at(j - t, t);
        }
        at(i - j, j) = v / diag;
      }
    }
    return true;
  }

  /// Solves L L^T x = b given the factor produced by cholesky_in_place().
  void cholesky_solve(std::span<double> b) const {
    // forward: L y = b
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t t0 = i > hb_ ? i - hb_ : 0;
      double s = b[i];
      for (std::size_t t = t0; t < i; ++t) {
        s -= at(i - t, t) * b[t];
      }
      b[i] = s / at(0, i);
    }
    // backward: L^T x = y
    for (std::size_t ii = n_; ii-- > 0;) {
      const std::size_t imax = std::min(ii + hb_, n_ - 1);
      double s = b[ii];
      for (std::size_t t = ii + 1; t <= imax; ++t) {
        s -= at(t - ii, ii) * b[t];
      }
      b[ii] = s / at(0, ii);
    }
  }

private:
  std::size_t n_;
  std::size_t hb_;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2_squared(std::span<const double> v) { return dot(v, v); }

inline double norm2(std::span<const double> v) {
  return std::sqrt(norm2_squared(v));
}

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_element_value(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return m;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace polyprotect
