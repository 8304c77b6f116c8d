#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "polyprotect/csv.hpp"
#include "polyprotect/embedding.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/transform.hpp"

namespace polyprotect {

/// Labelled genuine/impostor similarity scores. All scores are cosine
/// *similarities*; cosine distance is 1 - similarity throughout.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

inline double cosine_similarity(std::span<const double> a,
                                std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine of vectors with different lengths");
  }
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw ZeroVectorError("cosine of a zero vector is undefined");
  }
  const double s = sab / std::sqrt(saa * sbb);
  return std::clamp(s, -1.0, 1.0);
}

inline double cosine_distance(std::span<const double> a,
                              std::span<const double> b) {
  return 1.0 - cosine_similarity(a, b);
}

namespace detail {

struct LabelledView {
  const std::string* identity;
  const std::vector<double>* values;
};

inline ScoreSet score_all_pairs_impl(std::span<const LabelledView> items) {
  if (items.size() < 2) {
    throw InsufficientDataError("pair scoring needs at least 2 vectors");
  }
  bool two_identities = false;
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (*items[i].identity != *items[0].identity) {
      two_identities = true;
      break;
    }
  }
  if (!two_identities) {
    throw InsufficientDataError(
        "pair scoring needs at least 2 identities (no impostor pairs)");
  }
  ScoreSet scores;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const double s = cosine_similarity(*items[i].values, *items[j].values);
      if (*items[i].identity == *items[j].identity) {
        scores.genuine.push_back(s);
      } else {
        scores.impostor.push_back(s);
      }
    }
  }
  return scores;
}

}  // namespace detail

/// Every unordered pair is compared; same-identity pairs are genuine, the
/// rest impostor. Total count is C(N, 2).
inline ScoreSet score_all_pairs(const EmbeddingSet& set) {
  std::vector<detail::LabelledView> items;
  items.reserve(set.size());
  for (const Embedding& e : set.members()) {
    items.push_back({&e.identity, &e.values});
  }
  return detail::score_all_pairs_impl(items);
}

inline ScoreSet score_all_pairs(std::span<const ProtectedTemplate> templates) {
  std::vector<detail::LabelledView> items;
  items.reserve(templates.size());
  for (const ProtectedTemplate& t : templates) {
    items.push_back({&t.subject, &t.values});
  }
  return detail::score_all_pairs_impl(items);
}

/// fmr = fraction of impostor scores >= threshold,
/// fnmr = fraction of genuine scores < threshold.
inline std::pair<double, double> fmr_fnmr_at(const ScoreSet& s,
                                             double threshold) {
  if (s.genuine.empty() || s.impostor.empty()) {
    throw InsufficientDataError(
        "fmr/fnmr need non-empty genuine and impostor score lists");
  }
  std::size_t false_matches = 0;
  for (double v : s.impostor) {
    if (v >= threshold) ++false_matches;
  }
  std::size_t false_non_matches = 0;
  for (double v : s.genuine) {
    if (v < threshold) ++false_non_matches;
  }
  return {static_cast<double>(false_matches) / s.impostor.size(),
          static_cast<double>(false_non_matches) / s.genuine.size()};
}

/// Smallest threshold with fmr <= target_fmr. Candidates are the impostor
/// scores themselves; the returned value is the midpoint of the gap below
/// the chosen candidate when a distinct lower score exists, the candidate
/// itself otherwise. When even the largest impostor score cannot reach the
/// target (granularity floor), +infinity is returned, which sits above all
/// impostors and yields fmr = 0.
inline double threshold_at_fmr(const ScoreSet& s, double target_fmr) {
  if (s.impostor.empty()) {
    throw InsufficientDataError("threshold_at_fmr needs impostor scores");
  }
  if (!(target_fmr > 0.0) || target_fmr > 1.0) {
    throw ParameterError("target FMR must lie in (0, 1]");
  }
  std::vector<double> imp(s.impostor);
  std::sort(imp.begin(), imp.end());
  const double count = static_cast<double>(imp.size());
  // first (lowest) index whose candidate score reaches the target
  for (std::size_t i = 0; i < imp.size(); ++i) {
    if (i > 0 && imp[i] == imp[i - 1]) continue;
    const double fmr = (count - static_cast<double>(i)) / count;
    if (fmr <= target_fmr) {
      if (i > 0) {
        // midpoint of the gap; falls back to the candidate when the gap is
        // below double resolution so the fmr guarantee stays exact
        const double mid = 0.5 * (imp[i - 1] + imp[i]);
        return mid > imp[i - 1] ? mid : imp[i];
      }
      return imp[i];
    }
  }
  return std::numeric_limits<double>::infinity();
}

/// True when the target FMR is finer than 1/|impostor| can resolve.
inline bool fmr_target_unreachable(const ScoreSet& s, double target_fmr) {
  return !s.impostor.empty() &&
         target_fmr * static_cast<double>(s.impostor.size()) < 1.0;
}

/// FNMR measured at the operating point anchored to the target FMR.
inline double fnmr_at_fmr_anchor(const ScoreSet& s, double target_fmr) {
  return fmr_fnmr_at(s, threshold_at_fmr(s, target_fmr)).second;
}

struct DetPoint {
  double threshold;
  double fmr;
  double fnmr;
};

struct DetCurve {
  std::vector<DetPoint> points;
};

/// Error trade-off sampled on an even threshold grid over the pooled score
/// range. fmr is non-increasing and fnmr non-decreasing along the curve by
/// the counting semantics of fmr_fnmr_at.
inline DetCurve det_curve(const ScoreSet& s, std::size_t n_points) {
  if (n_points < 2) throw ParameterError("det_curve needs >= 2 points");
  if (s.genuine.empty() || s.impostor.empty()) {
    throw InsufficientDataError(
        "det_curve needs non-empty genuine and impostor score lists");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : s.genuine) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : s.impostor) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1e-12;

  DetCurve curve;
  curve.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t =
        lo + (hi - lo) * static_cast<double>(i) /
                 static_cast<double>(n_points - 1);
    const auto [fmr, fnmr] = fmr_fnmr_at(s, t);
    curve.points.push_back({t, fmr, fnmr});
  }
  return curve;
}

inline void save_det_curve(const DetCurve& curve,
                           const std::filesystem::path& path) {
  csv::Writer out(path);
  out.raw_line("threshold,fmr,fnmr");
  for (const DetPoint& p : curve.points) {
    out.raw_line(csv::format_double(p.threshold) + "," +
                 csv::format_double(p.fmr) + "," + csv::format_double(p.fnmr));
  }
  out.close();
}

struct Histogram {
  std::vector<double> bin_left;
  std::vector<double> bin_right;
  std::vector<std::size_t> count;
};

/// Equal-width bins over [min, max]; the top edge is inclusive. A
/// degenerate (all-equal) sample gets a single occupied bin of floor width.
inline Histogram compute_histogram(std::span<const double> scores,
                                   std::size_t bins) {
  if (scores.empty()) throw InsufficientDataError("histogram of no scores");
  if (bins == 0) throw ParameterError("histogram needs >= 1 bin");
  double lo = scores[0], hi = scores[0];
  for (double v : scores) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double width = (hi - lo) / static_cast<double>(bins);
  if (!(width > 0.0)) {
    width = 1e-12;
    hi = lo + width * static_cast<double>(bins);
  }
  Histogram h;
  h.bin_left.resize(bins);
  h.bin_right.resize(bins);
  h.count.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    h.bin_left[b] = lo + width * static_cast<double>(b);
    h.bin_right[b] = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : scores) {
    auto idx = static_cast<std::size_t>((v - lo) / width);
    if (idx >= bins) idx = bins - 1;
    ++h.count[idx];
  }
  return h;
}

inline void export_histogram(std::span<const double> scores, std::size_t bins,
                             const std::filesystem::path& path) {
  const Histogram h = compute_histogram(scores, bins);
  csv::Writer out(path);
  out.raw_line("bin_left,bin_right,count");
  for (std::size_t b = 0; b < h.count.size(); ++b) {
    out.raw_line(csv::format_double(h.bin_left[b]) + "," +
                 csv::format_double(h.bin_right[b]) + "," +
                 std::to_string(h.count[b]));
  }
  out.close();
}

}  // namespace polyprotect
