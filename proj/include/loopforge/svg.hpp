#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace loopforge {

/// Minimal SVG line plot: a pure function of (series, labels). Used to
/// re-plot verify reports offline.
struct SvgPlot {
    struct Series {
        std::string label;
        std::vector<double> x, y;
    };
    std::string title;
    std::vector<Series> series;
    bool log_x = false, log_y = false;

    std::string render(int width = 640, int height = 420) const {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        auto tx = [&](double v) { return log_x ? std::log10(std::max(v, 1e-300)) : v; };
        auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
        for (const Series& s : series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                xmin = std::min(xmin, tx(s.x[i]));
                xmax = std::max(xmax, tx(s.x[i]));
                ymin = std::min(ymin, ty(s.y[i]));
                ymax = std::max(ymax, ty(s.y[i]));
            }
        if (xmin > xmax) {
            xmin = 0;
            xmax = 1;
        }
        if (ymin > ymax) {
            ymin = 0;
            ymax = 1;
        }
        if (xmax == xmin) xmax = xmin + 1;
        if (ymax == ymin) ymax = ymin + 1;
        const double ml = 60, mr = 20, mt = 40, mb = 40;
        auto px = [&](double v) {
            return ml + (tx(v) - xmin) / (xmax - xmin) * (width - ml - mr);
        };
        auto py = [&](double v) {
            return height - mb - (ty(v) - ymin) / (ymax - ymin) * (height - mt - mb);
        };
        const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
        std::ostringstream svg;
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\">\n";
        svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
            << title << "</text>\n";
        svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
            << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
            << height - mb << "\" stroke=\"black\"/>\n";
        int ci = 0;
        for (const Series& s : series) {
            const char* color = colors[ci % 5];
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                svg << px(s.x[i]) << "," << py(s.y[i]) << " ";
            svg << "\"/>\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
                    << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
            svg << "<text x=\"" << width - mr - 150 << "\" y=\"" << mt + 16 * ci
                << "\" font-size=\"12\" fill=\"" << color << "\">" << s.label << "</text>\n";
            ++ci;
        }
        svg << "</svg>\n";
        return svg.str();
    }
};

/// Renders a verify report's main table as an SVG plot; recognizes the
/// per-experiment statistics layouts.
inline std::string plot_report(const nlohmann::json& report) {
    SvgPlot plot;
    plot.title = report.value("name", "report");
    const nlohmann::json& stats = report.at("statistics");
    if (plot.title == "small_loop_profile" && stats.contains("surface")) {
        std::map<std::int64_t, SvgPlot::Series> by_mesh;
        for (const auto& cell : stats.at("surface")) {
            auto& s = by_mesh[cell.at("mesh").get<std::int64_t>()];
            s.x.push_back(cell.at("delta").get<double>());
            s.y.push_back(cell.at("mean").get<double>());
        }
        for (auto& [mesh, s] : by_mesh) {
            s.label = "n = " + std::to_string(mesh);
            plot.series.push_back(std::move(s));
        }
        plot.log_x = true;
    } else if (stats.contains("cells")) {
        SvgPlot::Series s;
        s.label = "cells";
        int idx = 0;
        for (const auto& cell : stats.at("cells")) {
            double x = cell.contains("k")   ? cell.at("k").get<double>()
                       : cell.contains("R") ? cell.at("R").get<double>()
                                            : static_cast<double>(idx);
            double y = cell.contains("mean")       ? cell.at("mean").get<double>()
                       : cell.contains("survival") ? cell.at("survival").get<double>()
                       : cell.contains("empirical_mean")
                           ? cell.at("empirical_mean").get<double>()
                           : 0.0;
            s.x.push_back(x);
            s.y.push_back(y);
            ++idx;
        }
        plot.series.push_back(std::move(s));
    }
    return plot.render();
}

}  // namespace loopforge
