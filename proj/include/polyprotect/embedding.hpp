#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polyprotect/csv.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/rng.hpp"

namespace polyprotect {

/// One identity-labelled feature vector (an unprotected template).
struct Embedding {
  std::string identity;
  std::string sample;
  std::vector<double> values;
};

inline void validate_embedding(const Embedding& e) {
  csv::validate_label(e.identity, "identity");
  csv::validate_label(e.sample, "sample");
  if (e.values.empty()) {
    throw FormatError("embedding " + e.identity + "/" + e.sample +
                      " has no values");
  }
  for (double v : e.values) {
    if (!std::isfinite(v)) {
      throw FormatError("embedding " + e.identity + "/" + e.sample +
                        " contains a non-finite value");
    }
  }
}

/// Ordered collection of embeddings sharing one dimensionality.
/// (identity, sample) pairs are unique within a set.
class EmbeddingSet {
public:
  explicit EmbeddingSet(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ParameterError("embedding dimension must be >= 1");
  }

  void add(Embedding e) {
    validate_embedding(e);
    if (e.values.size() != dim_) {
      throw FormatError("embedding " + e.identity + "/" + e.sample + " has " +
                        std::to_string(e.values.size()) +
                        " values, expected " + std::to_string(dim_));
    }
    if (!seen_.emplace(e.identity, e.sample).second) {
      throw DuplicateSampleError("duplicate (identity, sample) pair: " +
                                 e.identity + "/" + e.sample);
    }
    members_.push_back(std::move(e));
  }

  const std::vector<Embedding>& members() const { return members_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

  /// Identity labels in first-appearance order.
  std::vector<std::string> identities() const {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const Embedding& e : members_) {
      if (seen.insert(e.identity).second) out.push_back(e.identity);
    }
    return out;
  }

  /// First member of each identity, in first-appearance order. This is the
  /// reference-per-subject rule used by attack campaigns and key selection.
  std::vector<const Embedding*> references() const {
    std::vector<const Embedding*> out;
    std::set<std::string_view> seen;
    for (const Embedding& e : members_) {
      if (seen.insert(e.identity).second) out.push_back(&e);
    }
    return out;
  }

private:
  std::size_t dim_;
  std::vector<Embedding> members_;
  std::set<std::pair<std::string, std::string>> seen_;
};

// ---------------------------------------------------------------------------
// CSV IO. Format: header `identity,sample,f0,...,f{n-1}`, UTF-8, '\n'
// endings, floats written with round-trip precision.
// ---------------------------------------------------------------------------

inline void save_embeddings(const EmbeddingSet& set,
                            const std::filesystem::path& path) {
  csv::Writer out(path);
  std::string header = "identity,sample";
  for (std::size_t i = 0; i < set.dim(); ++i) {
    header += ",f" + std::to_string(i);
  }
  out.raw_line(header);
  std::string line;
  for (const Embedding& e : set.members()) {
    line = e.identity;
    line += ',';
    line += e.sample;
    for (double v : e.values) {
      line += ',';
      line += csv::format_double(v);
    }
    out.raw_line(line);
  }
  out.close();
}

inline EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) {
    throw FormatError("empty embedding file: " + path.string());
  }
  const auto header = csv::split(lines.front());
  if (header.size() < 3 || header[0] != "identity" || header[1] != "sample") {
    throw FormatError("bad embedding header in " + path.string() +
                      " (expected identity,sample,f0,...)");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[i + 2] != "f" + std::to_string(i)) {
      throw FormatError("bad embedding header column " + std::to_string(i + 2) +
                        " in " + path.string());
    }
  }
  EmbeddingSet set(dim);
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto fields = csv::split(lines[row]);
    const std::string context = path.string() + ":" + std::to_string(row + 1);
    if (fields.size() != dim + 2) {
      throw FormatError("row with " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(dim + 2) +
                        " in " + context);
    }
    Embedding e;
    e.identity = std::string(fields[0]);
    e.sample = std::string(fields[1]);
    e.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      e.values.push_back(csv::parse_finite_double(fields[i + 2], context));
    }
    set.add(std::move(e));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

inline std::vector<double> normalize_l2(std::span<const double> v) {
  const double n2 = [&] {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  }();
  if (n2 == 0.0) throw ZeroVectorError("cannot L2-normalize the zero vector");
  if (!std::isfinite(n2)) {
    throw NonFiniteError("non-finite input to normalize_l2");
  }
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x *= inv;
  return out;
}

/// Per-element min/max statistics for range normalization.
struct ElementRanges {
  std::vector<double> mins;
  std::vector<double> maxs;
};

inline ElementRanges element_ranges(const EmbeddingSet& set) {
  if (set.empty()) throw EmptySetError("element_ranges of an empty set");
  ElementRanges r;
  r.mins.assign(set.dim(), std::numeric_limits<double>::infinity());
  r.maxs.assign(set.dim(), -std::numeric_limits<double>::infinity());
  for (const Embedding& e : set.members()) {
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      r.mins[i] = std::min(r.mins[i], e.values[i]);
      r.maxs[i] = std::max(r.maxs[i], e.values[i]);
    }
  }
  return r;
}

/// Affine map of each element into [-1, 1] using the supplied statistics.
inline std::vector<double> normalize_minmax(std::span<const double> v,
                                            const ElementRanges& stats) {
  if (stats.mins.size() != v.size() || stats.maxs.size() != v.size()) {
    throw DimensionError("min/max statistics do not match vector length");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double lo = stats.mins[i];
    const double hi = stats.maxs[i];
    if (!(hi > lo)) {
      throw DegenerateRangeError("element " + std::to_string(i) +
                                 " has max == min; range normalization "
                                 "undefined");
    }
    out[i] = 2.0 * (v[i] - lo) / (hi - lo) - 1.0;
  }
  return out;
}

enum class NormalizationMode { none, l2, minmax };

inline NormalizationMode parse_normalization_mode(std::string_view s) {
  if (s == "none") return NormalizationMode::none;
  if (s == "l2") return NormalizationMode::l2;
  if (s == "minmax") return NormalizationMode::minmax;
  throw ParameterError("unknown normalization mode: '" + std::string(s) +
                       "' (expected none, l2 or minmax)");
}

/// Applies the chosen normalization to every member. For minmax the
/// statistics are estimated on the set itself.
inline EmbeddingSet normalize_set(const EmbeddingSet& set,
                                  NormalizationMode mode) {
  if (mode == NormalizationMode::none) return set;
  EmbeddingSet out(set.dim());
  ElementRanges stats;
  if (mode == NormalizationMode::minmax) stats = element_ranges(set);
  for (const Embedding& e : set.members()) {
    Embedding n;
    n.identity = e.identity;
    n.sample = e.sample;
    n.values = mode == NormalizationMode::l2 ? normalize_l2(e.values)
                                             : normalize_minmax(e.values, stats);
    out.add(std::move(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

inline bool norm_is_zero(std::span<const double> v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

inline std::string format_index_label(std::string_view prefix,
                                      std::size_t index, int width) {
  std::string digits = std::to_string(index);
  std::string out(prefix);
  if (static_cast<int>(digits.size()) < width) {
    out.append(width - digits.size(), '0');
  }
  out += digits;
  return out;
}

/// Identity-clustered synthetic embeddings: each identity gets a uniformly
/// random unit-sphere centroid, each sample is the centroid plus isotropic
/// Gaussian within-class noise of expected norm `class_spread`, re-normalized
/// to the unit sphere and scaled. Keeping `class_spread` a noise-to-centroid
/// ratio (per-component sigma = class_spread / sqrt(dim)) makes the same
/// value produce the same cluster tightness at any dimension. `scale` sets
/// the global magnitude (models feature extractors whose embeddings lie in
/// wider ranges). Bit-identical for a fixed seed.
inline EmbeddingSet generate_synthetic(std::size_t identities,
                                       std::size_t samples_per_identity,
                                       std::size_t dim, double class_spread,
                                       double scale, std::uint64_t seed) {
  if (identities == 0 || samples_per_identity == 0) {
    throw ParameterError("identity and sample counts must be >= 1");
  }
  if (dim < 2) throw ParameterError("synthetic dim must be >= 2");
  if (!(class_spread >= 0.0) || !std::isfinite(class_spread)) {
    throw ParameterError("class_spread must be finite and >= 0");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParameterError("scale must be finite and > 0");
  }

  constexpr std::uint64_t kCentroidTag = 0x43454e54;  // stream separators
  constexpr std::uint64_t kSampleTag = 0x53414d50;

  auto gaussian_vector = [dim](Rng& rng) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.next_gaussian();
    return v;
  };

  EmbeddingSet set(dim);
  for (std::size_t i = 0; i < identities; ++i) {
    Rng centroid_rng(mix_seed({seed, kCentroidTag, i}));
    std::vector<double> centroid;
    do {
      centroid = gaussian_vector(centroid_rng);
    } while (norm_is_zero(centroid));
    centroid = normalize_l2(centroid);

    const double sigma = class_spread / std::sqrt(static_cast<double>(dim));
    for (std::size_t j = 0; j < samples_per_identity; ++j) {
      Rng sample_rng(mix_seed({seed, kSampleTag, i, j}));
      std::vector<double> v;
      do {
        v = centroid;
        const std::vector<double> noise = gaussian_vector(sample_rng);
        for (std::size_t d = 0; d < dim; ++d) {
          v[d] += sigma * noise[d];
        }
      } while (norm_is_zero(v));
      v = normalize_l2(v);
      for (double& x : v) x *= scale;

      Embedding e;
      e.identity = format_index_label("id", i, 4);
      e.sample = format_index_label("s", j, 3);
      e.values = std::move(v);
      set.add(std::move(e));
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Per-dimension statistics (the attacker's initial-guess model)
// ---------------------------------------------------------------------------

inline constexpr double kStddevFloor = 1e-6;

/// Independent per-dimension Gaussian parameters estimated from a set.
struct ElementDistribution {
  std::vector<double> means;
  std::vector<double> stddevs;
};

/// Sample mean and sample standard deviation (denominator N-1) per
/// dimension; standard deviations are floored at kStddevFloor so constant
/// columns and single-member sets still yield a usable sampler.
inline ElementDistribution estimate_distribution(const EmbeddingSet& set) {
  if (set.empty()) {
    throw EmptySetError("estimate_distribution of an empty set");
  }
  const std::size_t n = set.dim();
  const std::size_t count = set.size();
  ElementDistribution dist;
  dist.means.assign(n, 0.0);
  dist.stddevs.assign(n, kStddevFloor);

  for (const Embedding& e : set.members()) {
    for (std::size_t i = 0; i < n; ++i) dist.means[i] += e.values[i];
  }
  for (double& m : dist.means) m /= static_cast<double>(count);

  if (count >= 2) {
    std::vector<double> ss(n, 0.0);
    for (const Embedding& e : set.members()) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = e.values[i] - dist.means[i];
        ss[i] += d * d;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      dist.stddevs[i] =
          std::max(kStddevFloor,
                   std::sqrt(ss[i] / static_cast<double>(count - 1)));
    }
  }
  return dist;
}

}  // namespace polyprotect
