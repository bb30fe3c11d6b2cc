#include "csattn/svg_plot.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace csattn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

std::vector<std::string> csv_header(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        return split_csv_line(line);
    }
    throw std::runtime_error("csv: no header row in " + path);
}

std::vector<double> csv_column(const std::string& path, const std::string& column) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    std::size_t col = 0;
    std::vector<double> values;
    bool have_header = false;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv_line(line);
        if (!have_header) {
            header = cells;
            have_header = true;
            bool found = false;
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == column) {
                    col = i;
                    found = true;
                    break;
                }
            }
            if (!found) throw std::runtime_error("csv: no column '" + column + "' in " + path);
            continue;
        }
        if (col >= cells.size()) continue;
        values.push_back(std::strtod(cells[col].c_str(), nullptr));
    }
    return values;
}

void write_svg_chart(const std::string& path, const std::vector<PlotSeries>& series, const std::string& x_label,
                     const std::string& y_label) {
    if (series.empty()) throw std::runtime_error("svg: no series to plot");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::runtime_error("svg: series x/y length mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin) || !std::isfinite(ymin)) throw std::runtime_error("svg: no finite points");
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    const double width = 860, height = 480;
    const double ml = 70, mr = 140, mt = 24, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("svg: cannot open for writing: " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

    char buf[64];
    auto label = [&](double x, double y, const std::string& text, const char* anchor) {
        f << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\""
          << anchor << "\">" << text << "</text>\n";
    };
    std::snprintf(buf, sizeof(buf), "%.4g", ymin);
    label(ml - 6, mt + ph, buf, "end");
    std::snprintf(buf, sizeof(buf), "%.4g", ymax);
    label(ml - 6, mt + 10, buf, "end");
    std::snprintf(buf, sizeof(buf), "%.4g", xmin);
    label(ml, mt + ph + 16, buf, "middle");
    std::snprintf(buf, sizeof(buf), "%.4g", xmax);
    label(ml + pw, mt + ph + 16, buf, "middle");
    label(ml + pw / 2, height - 12, x_label, "middle");
    label(14, mt + 12, y_label, "start");

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 6];
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            f << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        }
        f << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(si);
        f << "<line x1=\"" << width - mr + 8 << "\" y1=\"" << ly - 4 << "\" x2=\"" << width - mr + 28 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        label(width - mr + 34, ly, s.name, "start");
    }
    f << "</svg>\n";
}

}  // namespace csattn
