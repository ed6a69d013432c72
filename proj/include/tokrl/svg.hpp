#pragma once

#include <string>
#include <vector>

namespace tokrl {

struct PlotSeries {
  std::string label;
  std::vector<double> ys;  // x is the 0-based index
};

// Standalone SVG line plot; series are auto-scaled to a shared y range and
// colored from a fixed palette.  Deterministic output for identical input.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label);

struct BarGroup {
  std::string label;              // x-axis group label
  std::vector<double> values;     // one bar per series, aligned across groups
};

// Grouped bar chart; series_labels name the bars within each group.
std::string svg_bar_chart(const std::vector<std::string>& series_labels,
                          const std::vector<BarGroup>& groups, const std::string& title,
                          const std::string& y_label);

}  // namespace tokrl
