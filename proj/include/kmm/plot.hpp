#pragma once

// Minimal CSV reader and standalone SVG line-chart writer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace kmm::plot {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  }
};

// Plain comma separation; the files this reads never quote fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line);
    } else {
      table.rows.push_back(split_csv_line(line));
    }
  }
  if (table.header.empty()) throw PlotError("CSV is empty (no header)");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PlotError("cannot open " + path);
  return read_csv(in);
}

struct SeriesSpec {
  std::string column;
  std::string label;
};

struct PlotSpec {
  std::string input_csv;
  std::string x_column;
  std::vector<SeriesSpec> y_columns;
  std::string title;
  std::string output_svg;
  bool log_y = false;
  // Split every y column into one series per distinct value of this column.
  std::string group_by;
  int width = 800;
  int height = 500;
};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round step of 1, 2 or 5 times a power of ten giving about `target` ticks.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

inline std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double step = nice_step(hi - lo, target);
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    out.push_back(std::fabs(t) < step * 1e-9 ? 0.0 : t);
  }
  return out;
}

inline std::string tick_label(double v) {
  if (v != 0.0 && (std::fabs(v) >= 1e6 || std::fabs(v) < 1e-3)) return fmt::format("{:.2g}", v);
  return fmt::format("{:g}", v);
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace detail

/// Extracts the series named by `spec` from the table. Rows whose x or y is
/// not a finite number are skipped (and y <= 0 on a log axis).
inline std::vector<Series> build_series(const CsvTable& table, const PlotSpec& spec) {
  auto require = [&](const std::string& name) {
    const auto c = table.column(name);
    if (!c) throw PlotError(fmt::format("column '{}' not found in CSV header", name));
    return *c;
  };
  if (spec.y_columns.empty()) throw PlotError("no y columns requested");
  const std::size_t x_col = require(spec.x_column);
  std::vector<std::size_t> y_cols;
  for (const auto& y : spec.y_columns) y_cols.push_back(require(y.column));
  const std::optional<std::size_t> group_col =
      spec.group_by.empty() ? std::nullopt : std::optional<std::size_t>(require(spec.group_by));
  if (table.rows.empty()) throw PlotError("no data rows");

  std::vector<std::string> groups;
  if (group_col) {
    for (const auto& row : table.rows) {
      if (*group_col >= row.size()) continue;
      if (std::find(groups.begin(), groups.end(), row[*group_col]) == groups.end()) {
        groups.push_back(row[*group_col]);
      }
    }
  } else {
    groups.emplace_back();
  }

  std::vector<Series> out;
  for (const auto& group : groups) {
    for (std::size_t s = 0; s < y_cols.size(); ++s) {
      Series series;
      const auto& label = spec.y_columns[s].label;
      if (!group_col) {
        series.label = label;
      } else {
        series.label = y_cols.size() == 1 ? group : label + " " + group;
      }
      for (const auto& row : table.rows) {
        if (group_col && (*group_col >= row.size() || row[*group_col] != group)) continue;
        if (x_col >= row.size() || y_cols[s] >= row.size()) continue;
        const auto x = detail::to_number(row[x_col]);
        const auto y = detail::to_number(row[y_cols[s]]);
        if (!x || !y || (spec.log_y && *y <= 0.0)) continue;
        series.points.emplace_back(*x, *y);
      }
      out.push_back(std::move(series));
    }
  }
  return out;
}

/// Renders the series as a standalone SVG document: one polyline per series,
/// axis ticks, a legend and a title.
inline std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  const double left = 80, right = 180, top = 50, bottom = 60;
  const double w = spec.width, h = spec.height;
  const double plot_w = w - left - right, plot_h = h - top - bottom;

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      const double yv = spec.log_y ? std::log10(y) : y;
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, yv);
      y_hi = std::max(y_hi, yv);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;

  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) {
    const double v = spec.log_y ? std::log10(y) : y;
    return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h;
  };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      spec.width, spec.height, spec.width, spec.height);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", spec.width,
                     spec.height);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
                     left + plot_w / 2, detail::escape(spec.title));
  svg += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
      left, top, plot_w, plot_h);

  for (double t : detail::ticks(x_lo, x_hi)) {
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4}</text>\n",
        px(t), top + plot_h, top + plot_h + 5, top + plot_h + 18, detail::tick_label(t));
  }
  for (double t : detail::ticks(y_lo, y_hi)) {
    const double value = spec.log_y ? std::pow(10.0, t) : t;
    const double y = top + plot_h - (t - y_lo) / (y_hi - y_lo) * plot_h;
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5}</text>\n",
        left - 5, y, left, left - 8, y + 4, detail::tick_label(value));
  }
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", left + plot_w / 2,
                     h - 15, detail::escape(spec.x_column));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = detail::kPalette[s % std::size(detail::kPalette)];
    std::string points;
    for (const auto& [x, y] : series[s].points) {
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(x), py(y));
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color,
                       points);
    const double ly = top + 10 + 20.0 * static_cast<double>(s);
    svg += fmt::format(
        "<g class=\"legend\"><line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" "
        "stroke-width=\"3\"/><text x=\"{4:.2f}\" y=\"{5:.2f}\">{6}</text></g>\n",
        left + plot_w + 15, ly, left + plot_w + 40, color, left + plot_w + 45, ly + 4,
        detail::escape(series[s].label));
  }
  svg += "</svg>\n";
  return svg;
}

/// Reads spec.input_csv and writes spec.output_svg.
inline void plot_csv(const PlotSpec& spec) {
  const CsvTable table = read_csv_file(spec.input_csv);
  const auto series = build_series(table, spec);
  const std::string svg = render_svg(series, spec);
  std::ofstream out(spec.output_svg, std::ios::binary);
  if (!out) throw PlotError("cannot write " + spec.output_svg);
  out << svg;
  out.close();
  if (!out) throw PlotError("failed writing " + spec.output_svg);
}

}  // namespace kmm::plot
