#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyprotect/errors.hpp"
#include "polyprotect/metrics.hpp"

namespace polyprotect {

/// Column-aligned plain-text table.
inline void write_text_table(std::ostream& out,
                             const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < widths.size(); ++c) {
      const std::string& cell = c < row.size() ? row[c] : std::string();
      out << cell << std::string(widths[c] - cell.size(), ' ');
      out << (c + 1 == widths.size() ? "\n" : "  ");
    }
  };
  emit(header);
  std::vector<std::string> rule;
  rule.reserve(widths.size());
  for (std::size_t w : widths) rule.emplace_back(w, '-');
  emit(rule);
  for (const auto& row : rows) emit(row);
}

/// One named score collection for the histogram overlay.
struct HistogramSeries {
  std::string label;
  std::vector<double> scores;
  std::string color;  // e.g. "#2c7fb8"
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Overlaid score histograms as a self-contained SVG: shared equal-width
/// bins over the pooled range, one translucent bar series per input,
/// counts normalized per series so differently sized collections compare.
inline void write_histogram_svg(const std::filesystem::path& path,
                                std::span<const HistogramSeries> series,
                                std::size_t bins, const std::string& title) {
  if (series.empty()) throw ParameterError("no histogram series given");
  if (bins == 0) throw ParameterError("histogram needs >= 1 bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const HistogramSeries& s : series) {
    if (s.scores.empty()) {
      throw InsufficientDataError("histogram series '" + s.label +
                                  "' is empty");
    }
    for (double v : s.scores) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1e-12;
  const double width = (hi - lo) / static_cast<double>(bins);

  const double plot_w = 640.0, plot_h = 360.0;
  const double margin_l = 60.0, margin_b = 46.0, margin_t = 34.0,
               margin_r = 18.0;
  const double img_w = plot_w + margin_l + margin_r;
  const double img_h = plot_h + margin_t + margin_b + 18.0 * series.size();

  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << img_w
      << "\" height=\"" << img_h << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << margin_l << "\" y=\"20\" font-size=\"14\">"
      << detail::svg_escape(title) << "</text>\n";

  // normalized densities
  std::vector<std::vector<double>> fractions;
  double max_fraction = 0.0;
  for (const HistogramSeries& s : series) {
    std::vector<double> f(bins, 0.0);
    for (double v : s.scores) {
      auto idx = static_cast<std::size_t>((v - lo) / width);
      if (idx >= bins) idx = bins - 1;
      f[idx] += 1.0;
    }
    for (double& x : f) x /= static_cast<double>(s.scores.size());
    for (double x : f) max_fraction = std::max(max_fraction, x);
    fractions.push_back(std::move(f));
  }
  if (max_fraction == 0.0) max_fraction = 1.0;

  // axes
  const double x0 = margin_l, y0 = margin_t + plot_h;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + plot_w
      << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x0 << "\" y1=\"" << margin_t << "\" x2=\"" << x0
      << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double tx = lo + (hi - lo) * tick / 4.0;
    const double px = x0 + plot_w * tick / 4.0;
    out << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px
        << "\" y2=\"" << y0 + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << y0 + 20
        << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::svg_num(tx)
        << "</text>\n";
  }
  out << "<text x=\"" << x0 + plot_w / 2 << "\" y=\"" << y0 + 38
      << "\" font-size=\"12\" text-anchor=\"middle\">cosine similarity"
      << "</text>\n";

  // bars
  for (std::size_t si = 0; si < series.size(); ++si) {
    const std::string& color =
        series[si].color.empty() ? "#888888" : series[si].color;
    for (std::size_t b = 0; b < bins; ++b) {
      const double frac = fractions[si][b];
      if (frac == 0.0) continue;
      const double bar_h = plot_h * frac / max_fraction;
      const double bx = x0 + plot_w * static_cast<double>(b) /
                                 static_cast<double>(bins);
      const double bw = plot_w / static_cast<double>(bins);
      out << "<rect x=\"" << detail::svg_num(bx) << "\" y=\""
          << detail::svg_num(y0 - bar_h) << "\" width=\""
          << detail::svg_num(bw) << "\" height=\"" << detail::svg_num(bar_h)
          << "\" fill=\"" << color << "\" fill-opacity=\"0.45\"/>\n";
    }
  }

  // legend
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double ly = y0 + 50.0 + 18.0 * static_cast<double>(si);
    const std::string& color =
        series[si].color.empty() ? "#888888" : series[si].color;
    out << "<rect x=\"" << x0 << "\" y=\"" << ly - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << color
        << "\" fill-opacity=\"0.45\"/>\n";
    out << "<text x=\"" << x0 + 18 << "\" y=\"" << ly
        << "\" font-size=\"12\">" << detail::svg_escape(series[si].label)
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failure: " + path.string());
}

}  // namespace polyprotect
