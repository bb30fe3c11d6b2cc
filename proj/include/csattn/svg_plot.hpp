#pragma once

#include <string>
#include <vector>

namespace csattn {

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

// Minimal SVG line chart for the CSV curve artifacts.
void write_svg_chart(const std::string& path, const std::vector<PlotSeries>& series, const std::string& x_label,
                     const std::string& y_label);

// CSV helpers for the metrics logs ('#'-prefixed lines are comments).
std::vector<std::string> csv_header(const std::string& path);
std::vector<double> csv_column(const std::string& path, const std::string& column);

}  // namespace csattn
