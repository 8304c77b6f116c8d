#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "polyprotect/csv.hpp"
#include "polyprotect/embedding.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/linalg.hpp"
#include "polyprotect/rng.hpp"

namespace polyprotect {

inline constexpr std::size_t kDefaultWindowSize = 5;
inline constexpr int kDefaultCoefficientRange = 50;

/// Subject-specific secret material of the transform: window coefficients C
/// (unique non-zero integers) and exponents E (a permutation of 1..m), plus
/// the window overlap.
struct Keys {
  std::string subject;
  std::size_t overlap = 0;
  std::vector<int> coefficients;
  std::vector<int> exponents;

  std::size_t m() const { return coefficients.size(); }
};

inline void validate_keys(const Keys& k) {
  csv::validate_label(k.subject, "subject");
  const std::size_t m = k.coefficients.size();
  if (m == 0) throw InvariantError("keys need at least one coefficient");
  if (k.exponents.size() != m) {
    throw InvariantError("coefficient and exponent counts differ for " +
                         k.subject);
  }
  if (k.overlap >= m) {
    throw InvariantError("overlap " + std::to_string(k.overlap) +
                         " must be < m = " + std::to_string(m));
  }
  std::set<int> cs(k.coefficients.begin(), k.coefficients.end());
  if (cs.size() != m) {
    throw InvariantError("coefficients are not unique for " + k.subject);
  }
  if (cs.count(0) != 0) {
    throw InvariantError("coefficient 0 is not allowed for " + k.subject);
  }
  std::vector<int> es(k.exponents);
  std::sort(es.begin(), es.end());
  for (std::size_t i = 0; i < m; ++i) {
    if (es[i] != static_cast<int>(i) + 1) {
      throw InvariantError("exponents are not a permutation of 1.." +
                           std::to_string(m) + " for " + k.subject);
    }
  }
}

/// Number of length-m windows at stride (m - overlap) covering an
/// n-dimensional input, the final incomplete window being zero-padded:
/// k = ceil((n - m) / (m - overlap)) + 1.
inline std::size_t output_dim(std::size_t n, std::size_t m,
                              std::size_t overlap) {
  if (m == 0 || m > n) {
    throw ParameterError("window size m must satisfy 1 <= m <= n (m = " +
                         std::to_string(m) + ", n = " + std::to_string(n) +
                         ")");
  }
  if (overlap >= m) {
    throw ParameterError("overlap must be < m (overlap = " +
                         std::to_string(overlap) +
                         ", m = " + std::to_string(m) + ")");
  }
  const std::size_t stride = m - overlap;
  return (n - m + stride - 1) / stride + 1;
}

/// Uniform random keys: coefficients drawn without replacement from
/// {-c_range..-1, 1..c_range}, exponents a uniform permutation of 1..m.
inline Keys generate_random_keys(std::string subject, std::size_t m,
                                 std::size_t overlap, int c_range,
                                 std::uint64_t seed) {
  if (m == 0) throw ParameterError("m must be >= 1");
  if (overlap >= m) throw ParameterError("overlap must be < m");
  if (c_range < static_cast<int>(m)) {
    throw ParameterError("c_range must be >= m so that " + std::to_string(m) +
                         " distinct non-zero coefficients exist");
  }
  Rng rng(mix_seed({seed, fnv1a64(subject), m, overlap}));

  // partial Fisher-Yates over the 2*c_range candidate coefficients
  std::vector<int> pool;
  pool.reserve(2 * static_cast<std::size_t>(c_range));
  for (int c = -c_range; c <= c_range; ++c) {
    if (c != 0) pool.push_back(c);
  }
  Keys keys;
  keys.subject = std::move(subject);
  keys.overlap = overlap;
  keys.coefficients.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    keys.coefficients.push_back(pool[i]);
  }

  keys.exponents.resize(m);
  for (std::size_t i = 0; i < m; ++i) keys.exponents[i] = static_cast<int>(i) + 1;
  for (std::size_t i = m; i-- > 1;) {
    const std::size_t j = rng.below(i + 1);
    std::swap(keys.exponents[i], keys.exponents[j]);
  }
  return keys;
}

/// x^e for small non-negative integer e, with the convention x^0 = 1 for
/// every x including 0.
inline double pow_int(double x, int e) {
  double r = 1.0;
  for (int t = 0; t < e; ++t) r *= x;
  return r;
}

/// Core window evaluation: window j (0-based) maps to
///   p_j = sum_r c_r * v[j*(m-o) + r]^{e_r},
/// with v zero-extended past its length. Coefficients are unconstrained here
/// (the transform is linear in them); exponents must be positive.
inline std::vector<double> polynomial_windows(std::span<const double> v,
                                              std::span<const int> c,
                                              std::span<const int> e,
                                              std::size_t overlap) {
  const std::size_t m = c.size();
  if (m == 0 || e.size() != m) {
    throw ParameterError("coefficient/exponent lengths invalid");
  }
  for (int ei : e) {
    if (ei < 1) throw ParameterError("exponents must be >= 1");
  }
  if (v.size() < m) {
    throw DimensionError("input of length " + std::to_string(v.size()) +
                         " is shorter than the window size " +
                         std::to_string(m));
  }
  if (!all_finite(v)) {
    throw NonFiniteError("non-finite input to the window transform");
  }

  const std::size_t n = v.size();
  const std::size_t k = output_dim(n, m, overlap);
  const std::size_t stride = m - overlap;
  std::vector<double> p(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t base = j * stride;
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = base + r;
      if (i >= n) break;  // zero-padded tail contributes nothing (e >= 1)
      s += static_cast<double>(c[r]) * pow_int(v[i], e[r]);
    }
    p[j] = s;
  }
  return p;
}

inline std::vector<double> protect_values(std::span<const double> v,
                                          const Keys& keys) {
  validate_keys(keys);
  std::vector<double> p =
      polynomial_windows(v, keys.coefficients, keys.exponents, keys.overlap);
  if (!all_finite(p)) {
    throw NonFiniteError("window transform overflowed to a non-finite value");
  }
  return p;
}

/// Protected counterpart of an embedding.
struct ProtectedTemplate {
  std::string subject;
  std::string sample;
  std::size_t overlap = 0;
  std::vector<double> values;
};

inline ProtectedTemplate protect(const Embedding& e, const Keys& keys) {
  ProtectedTemplate t;
  t.subject = e.identity;
  t.sample = e.sample;
  t.overlap = keys.overlap;
  t.values = protect_values(e.values, keys);
  return t;
}

/// Analytic Jacobian of the window transform, row-sparse: entry (j, i) is
/// c_r * e_r * v_i^{e_r - 1} where slot r of window j touches element i.
/// Within one row every touched column is distinct; padded positions yield
/// no entries.
inline SparseMatrix transform_jacobian(std::span<const double> v,
                                       const Keys& keys) {
  validate_keys(keys);
  const std::size_t m = keys.m();
  if (v.size() < m) {
    throw DimensionError("input shorter than the window size");
  }
  if (!all_finite(v)) {
    throw NonFiniteError("non-finite input to transform_jacobian");
  }
  const std::size_t n = v.size();
  const std::size_t k = output_dim(n, m, keys.overlap);
  const std::size_t stride = m - keys.overlap;

  SparseMatrix jac;
  jac.n_rows = k;
  jac.n_cols = n;
  jac.rows.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    SparseRow& row = jac.rows[j];
    const std::size_t base = j * stride;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = base + r;
      if (i >= n) break;
      const double cr = static_cast<double>(keys.coefficients[r]);
      const double er = static_cast<double>(keys.exponents[r]);
      row.cols.push_back(i);
      row.vals.push_back(cr * er * pow_int(v[i], keys.exponents[r] - 1));
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Keys CSV. Header `subject,m,overlap,c1..cm,e1..em`; every row in one file
// carries the same m. Invariants are re-validated on load.
// ---------------------------------------------------------------------------

inline void save_keys(std::span<const Keys> keys,
                      const std::filesystem::path& path) {
  if (keys.empty()) {
    throw ParameterError("refusing to save an empty key list (m unknown)");
  }
  const std::size_t m = keys.front().m();
  for (const Keys& k : keys) {
    validate_keys(k);
    if (k.m() != m) {
      throw FormatError("key list mixes window sizes; one file carries one m");
    }
  }
  csv::Writer out(path);
  std::string header = "subject,m,overlap";
  for (std::size_t i = 1; i <= m; ++i) header += ",c" + std::to_string(i);
  for (std::size_t i = 1; i <= m; ++i) header += ",e" + std::to_string(i);
  out.raw_line(header);
  std::string line;
  for (const Keys& k : keys) {
    line = k.subject;
    line += ',';
    line += std::to_string(m);
    line += ',';
    line += std::to_string(k.overlap);
    for (int c : k.coefficients) {
      line += ',';
      line += std::to_string(c);
    }
    for (int e : k.exponents) {
      line += ',';
      line += std::to_string(e);
    }
    out.raw_line(line);
  }
  out.close();
}

inline std::vector<Keys> load_keys(const std::filesystem::path& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) throw FormatError("empty key file: " + path.string());
  const auto header = csv::split(lines.front());
  if (header.size() < 5 || header[0] != "subject" || header[1] != "m" ||
      header[2] != "overlap") {
    throw FormatError("bad key header in " + path.string());
  }
  const std::size_t m = (header.size() - 3) / 2;
  if (header.size() != 3 + 2 * m) {
    throw FormatError("bad key header width in " + path.string());
  }

  std::vector<Keys> keys;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto fields = csv::split(lines[row]);
    const std::string context = path.string() + ":" + std::to_string(row + 1);
    if (fields.size() != 3 + 2 * m) {
      throw FormatError("bad key row width in " + context);
    }
    Keys k;
    k.subject = std::string(fields[0]);
    const long long row_m = csv::parse_int(fields[1], context);
    if (row_m != static_cast<long long>(m)) {
      throw FormatError("row m does not match header in " + context);
    }
    const long long o = csv::parse_int(fields[2], context);
    if (o < 0) throw FormatError("negative overlap in " + context);
    k.overlap = static_cast<std::size_t>(o);
    for (std::size_t i = 0; i < m; ++i) {
      k.coefficients.push_back(
          static_cast<int>(csv::parse_int(fields[3 + i], context)));
    }
    for (std::size_t i = 0; i < m; ++i) {
      k.exponents.push_back(
          static_cast<int>(csv::parse_int(fields[3 + m + i], context)));
    }
    validate_keys(k);
    keys.push_back(std::move(k));
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Protected-template CSV. Header `subject,sample,overlap,p0,...,p{k-1}`.
// ---------------------------------------------------------------------------

inline void save_protected(std::span<const ProtectedTemplate> templates,
                           const std::filesystem::path& path) {
  if (templates.empty()) {
    throw ParameterError("refusing to save an empty template list (k unknown)");
  }
  const std::size_t k = templates.front().values.size();
  csv::Writer out(path);
  std::string header = "subject,sample,overlap";
  for (std::size_t i = 0; i < k; ++i) header += ",p" + std::to_string(i);
  out.raw_line(header);
  std::string line;
  for (const ProtectedTemplate& t : templates) {
    if (t.values.size() != k) {
      throw FormatError("template list mixes output dimensions");
    }
    csv::validate_label(t.subject, "subject");
    csv::validate_label(t.sample, "sample");
    line = t.subject;
    line += ',';
    line += t.sample;
    line += ',';
    line += std::to_string(t.overlap);
    for (double v : t.values) {
      line += ',';
      line += csv::format_double(v);
    }
    out.raw_line(line);
  }
  out.close();
}

inline std::vector<ProtectedTemplate> load_protected(
    const std::filesystem::path& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) {
    throw FormatError("empty template file: " + path.string());
  }
  const auto header = csv::split(lines.front());
  if (header.size() < 4 || header[0] != "subject" || header[1] != "sample" ||
      header[2] != "overlap") {
    throw FormatError("bad protected-template header in " + path.string());
  }
  const std::size_t k = header.size() - 3;
  std::vector<ProtectedTemplate> out;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto fields = csv::split(lines[row]);
    const std::string context = path.string() + ":" + std::to_string(row + 1);
    if (fields.size() != 3 + k) {
      throw FormatError("bad template row width in " + context);
    }
    ProtectedTemplate t;
    t.subject = std::string(fields[0]);
    t.sample = std::string(fields[1]);
    const long long o = csv::parse_int(fields[2], context);
    if (o < 0) throw FormatError("negative overlap in " + context);
    t.overlap = static_cast<std::size_t>(o);
    t.values.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      t.values.push_back(csv::parse_finite_double(fields[3 + i], context));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace polyprotect
