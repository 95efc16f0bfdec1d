#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpw {

// Static log-log scatter plot with a fitted line, emitted as plain SVG.
inline void write_loglog_svg(const std::string& path, const std::vector<double>& n_values,
                            const std::vector<double>& means, double slope, double intercept,
                            const std::string& title) {
    if (n_values.size() != means.size() || n_values.empty())
        throw std::invalid_argument("write_loglog_svg: mismatched data");
    const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        const double x = std::log10(n_values[i]), y = std::log10(means[i]);
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
    const double xpad = 0.05 * (xmax - xmin + 1e-12), ypad = 0.1 * (ymax - ymin + 1e-12);
    xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

    auto px = [&](double lx) { return ml + (lx - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double ly) { return H - mb - (ly - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_loglog_svg: cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << W / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
        << "</text>\n";

    // axes
    out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n"
        << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n"
        << "<text x='" << (W / 2) << "' y='" << H - 12
        << "' text-anchor='middle' font-size='12'>log10(N)</text>\n"
        << "<text x='16' y='" << H / 2 << "' font-size='12' transform='rotate(-90 16 " << H / 2
        << ")' text-anchor='middle'>log10(mean W2)</text>\n";

    // tick labels at data extremes
    std::ostringstream t;
    t.precision(3);
    for (double lx : {xmin + xpad, xmax - xpad}) {
        out << "<text x='" << px(lx) << "' y='" << H - mb + 16
            << "' text-anchor='middle' font-size='10'>" << lx << "</text>\n";
    }
    for (double ly : {ymin + ypad, ymax - ypad}) {
        out << "<text x='" << ml - 6 << "' y='" << py(ly) + 4
            << "' text-anchor='end' font-size='10'>" << ly << "</text>\n";
    }

    // fitted line
    out << "<line x1='" << px(xmin) << "' y1='" << py(slope * xmin + intercept) << "' x2='"
        << px(xmax) << "' y2='" << py(slope * xmax + intercept)
        << "' stroke='red' stroke-width='1.5'/>\n";

    // data points
    for (std::size_t i = 0; i < n_values.size(); ++i)
        out << "<circle cx='" << px(std::log10(n_values[i])) << "' cy='"
            << py(std::log10(means[i])) << "' r='4' fill='steelblue'/>\n";

    std::ostringstream ann;
    ann.precision(4);
    ann << "slope = " << slope << ", intercept = " << intercept;
    out << "<text x='" << W - mr - 8 << "' y='" << mt + 16
        << "' text-anchor='end' font-size='12' fill='red'>" << ann.str() << "</text>\n</svg>\n";
}

}  // namespace dpw
