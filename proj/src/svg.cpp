#include "tokrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tokrl/errors.hpp"

namespace tokrl {

namespace {

constexpr double kWidth = 800, kHeight = 480;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

struct Range {
  double lo = 0, hi = 1;
  double scale(double v, double px_lo, double px_hi) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

Range pad_range(double lo, double hi) {
  if (!(hi > lo)) {  // flat or single-valued data
    lo -= 1.0;
    hi += 1.0;
  }
  double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape_text(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const std::string& x_label, const std::string& y_label,
               const Range& yr) {
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + kPlotH << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + kPlotH << "\" x2=\"" << kLeft + kPlotW
      << "\" y2=\"" << kTop + kPlotH << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape_text(x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << kTop + kPlotH / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 18 " << kTop + kPlotH / 2 << ")\">" << escape_text(y_label)
      << "</text>\n";
  for (int k = 0; k <= 4; ++k) {  // horizontal gridlines and y ticks
    double v = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    double y = yr.scale(v, kTop + kPlotH, kTop);
    out << "<line x1=\"" << kLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft + kPlotW
        << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v)
        << "</text>\n";
  }
}

void draw_legend(std::ostringstream& out, const std::vector<std::string>& labels) {
  double x = kLeft + 10, y = kTop + 8;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const char* color = kPalette[i % kPaletteSize];
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"12\" height=\"12\" fill=\""
        << color << "\"/>\n"
        << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_text(labels[i])
        << "</text>\n";
    y += 18;
  }
}

}  // namespace

std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label) {
  require(!series.empty(), "line plot needs at least one series");
  std::size_t max_len = 0;
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : series) {
    require(!s.ys.empty(), "series '" + s.label + "' is empty");
    max_len = std::max(max_len, s.ys.size());
    for (double v : s.ys) {
      require(std::isfinite(v), "series '" + s.label + "' has a non-finite value");
      if (!any) { lo = hi = v; any = true; }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  Range yr = pad_range(lo, hi);
  Range xr{0.0, static_cast<double>(max_len > 1 ? max_len - 1 : 1)};

  std::ostringstream out;
  open_svg(out, title);
  draw_axes(out, x_label, y_label, yr);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPaletteSize];
    if (s.ys.size() == 1) {
      out << "<circle cx=\"" << num(xr.scale(0, kLeft, kLeft + kPlotW)) << "\" cy=\""
          << num(yr.scale(s.ys[0], kTop + kPlotH, kTop)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
      continue;
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < s.ys.size(); ++t) {
      if (t > 0) out << ' ';
      out << num(xr.scale(static_cast<double>(t), kLeft, kLeft + kPlotW)) << ','
          << num(yr.scale(s.ys[t], kTop + kPlotH, kTop));
    }
    out << "\"/>\n";
  }
  std::vector<std::string> labels;
  for (const auto& s : series) labels.push_back(s.label);
  draw_legend(out, labels);
  out << "</svg>\n";
  return out.str();
}

std::string svg_bar_chart(const std::vector<std::string>& series_labels,
                          const std::vector<BarGroup>& groups, const std::string& title,
                          const std::string& y_label) {
  require(!series_labels.empty(), "bar chart needs at least one series");
  require(!groups.empty(), "bar chart needs at least one group");
  double lo = 0, hi = 0;
  for (const auto& g : groups) {
    require(g.values.size() == series_labels.size(),
            "group '" + g.label + "' value count disagrees with series labels");
    for (double v : g.values) {
      require(std::isfinite(v), "group '" + g.label + "' has a non-finite value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  Range yr = pad_range(lo, hi);

  std::ostringstream out;
  open_svg(out, title);
  draw_axes(out, "", y_label, yr);
  double group_w = kPlotW / static_cast<double>(groups.size());
  double bar_w = group_w * 0.8 / static_cast<double>(series_labels.size());
  double base_y = yr.scale(std::max(0.0, yr.lo), kTop + kPlotH, kTop);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double gx = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t s = 0; s < series_labels.size(); ++s) {
      double v = groups[g].values[s];
      double vy = yr.scale(v, kTop + kPlotH, kTop);
      double y0 = std::min(vy, base_y), h = std::abs(vy - base_y);
      out << "<rect x=\"" << num(gx + bar_w * static_cast<double>(s)) << "\" y=\"" << num(y0)
          << "\" width=\"" << num(bar_w) << "\" height=\"" << num(h) << "\" fill=\""
          << kPalette[s % kPaletteSize] << "\"/>\n";
    }
    out << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << kTop + kPlotH + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape_text(groups[g].label) << "</text>\n";
  }
  draw_legend(out, series_labels);
  out << "</svg>\n";
  return out.str();
}

}  // namespace tokrl
