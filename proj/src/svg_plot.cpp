#include "crashsamp/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "crashsamp/kv_file.hpp"
#include "crashsamp/types.hpp"

namespace crashsamp {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

std::string num(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

struct Series {
    std::vector<std::pair<double, double>> pts;
};

}  // namespace

void write_rmse_svg(std::ostream& out, std::span<const RmseRow> rows, const PlotOptions& opt) {
    if (rows.empty()) throw ConfigError("plot: no RMSE rows");

    std::vector<std::string> labels;
    std::array<std::map<std::string, Series>, 3> panels;
    for (const auto& r : rows) {
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
        if (!std::isfinite(r.rmse) || r.reps == 0) continue;
        if (opt.log_y && r.rmse <= 0.0) continue;
        panels[target_index(r.target)][r.label].pts.emplace_back(double(r.sims), r.rmse);
    }

    const int margin_l = 70, margin_r = 20, margin_t = 50, margin_b = 45;
    const int legend_h = 18 * int(labels.size()) + 20;
    const int pw = opt.panel_width, ph = opt.panel_height;
    const int width = 3 * (pw + margin_l + margin_r);
    const int height = margin_t + ph + margin_b + legend_h;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
            << escape(opt.title) << "</text>\n";

    for (Target t : kAllTargets) {
        const auto& series = panels[target_index(t)];
        const int x0 = target_index(t) * (pw + margin_l + margin_r) + margin_l;
        const int y0 = margin_t;

        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& [_, s] : series)
            for (auto [x, y] : s.pts) {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }

        out << "<g>\n<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 - 8 << "\" text-anchor=\"middle\" font-size=\"12\">"
            << to_string(t) << "</text>\n";
        out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 + ph + 32
            << "\" text-anchor=\"middle\">simulations</text>\n";
        out << "<text transform=\"translate(" << x0 - 52 << "," << y0 + ph / 2
            << ") rotate(-90)\" text-anchor=\"middle\">RMSE</text>\n";

        if (!std::isfinite(xmin)) {
            out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 + ph / 2
                << "\" text-anchor=\"middle\" fill=\"#888\">no data</text>\n</g>\n";
            continue;
        }
        if (xmax == xmin) xmax = xmin + 1.0;
        auto ty = [&](double y) { return opt.log_y ? std::log10(y) : y; };
        double lo = ty(ymin), hi = ty(ymax);
        if (hi == lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        if (!opt.log_y) lo = std::min(lo, 0.0);
        auto px = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * pw; };
        auto py = [&](double y) { return y0 + ph - (ty(y) - lo) / (hi - lo) * ph; };

        for (int i = 0; i <= 4; ++i) {
            double x = xmin + (xmax - xmin) * i / 4.0;
            out << "<line x1=\"" << num(px(x)) << "\" y1=\"" << y0 + ph << "\" x2=\"" << num(px(x)) << "\" y2=\""
                << y0 + ph + 4 << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << num(px(x)) << "\" y=\"" << y0 + ph + 16 << "\" text-anchor=\"middle\">"
                << std::llround(x) << "</text>\n";
        }
        for (int i = 0; i <= 4; ++i) {
            double v = lo + (hi - lo) * i / 4.0;
            double y = opt.log_y ? std::pow(10.0, v) : v;
            double yy = y0 + ph - (v - lo) / (hi - lo) * ph;
            out << "<line x1=\"" << x0 << "\" y1=\"" << num(yy) << "\" x2=\"" << x0 + pw << "\" y2=\"" << num(yy)
                << "\" stroke=\"#ddd\"/>\n";
            out << "<text x=\"" << x0 - 4 << "\" y=\"" << num(yy + 4) << "\" text-anchor=\"end\">" << num(y)
                << "</text>\n";
        }

        for (std::size_t li = 0; li < labels.size(); ++li) {
            auto it = series.find(labels[li]);
            if (it == series.end()) continue;
            out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[li % std::size(kPalette)]
                << "\" points=\"";
            for (auto [x, y] : it->second.pts) out << num(px(x)) << ',' << num(py(y)) << ' ';
            out << "\"/>\n";
        }
        out << "</g>\n";
    }

    int ly = margin_t + ph + margin_b + 10;
    for (std::size_t li = 0; li < labels.size(); ++li, ly += 18) {
        const char* col = kPalette[li % std::size(kPalette)];
        out << "<line x1=\"" << margin_l << "\" y1=\"" << ly << "\" x2=\"" << margin_l + 24 << "\" y2=\"" << ly
            << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << margin_l + 30 << "\" y=\"" << ly + 4 << "\">" << escape(labels[li]) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace crashsamp
