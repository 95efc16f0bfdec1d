#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpw/domain.hpp"
#include "dpw/transport.hpp"
#include "dpw/trainer.hpp"

namespace dpw {

// shortest round-trip decimal representation; keeps CSV bodies byte-stable
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_density_csv(const TabulatedDensity& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_density_csv: cannot open " + path);
    if (d.is_1d()) {
        out << "x,value,cdf\n";
        for (Eigen::Index i = 0; i < d.grid.size(); ++i)
            out << fmt_double(d.grid[i]) << ',' << fmt_double(d.values[i]) << ','
                << fmt_double(d.cdf[i]) << '\n';
    } else {
        out << "x1,x2,value\n";
        for (Eigen::Index i = 0; i < d.r_grid.size(); ++i)
            for (Eigen::Index j = 0; j < d.theta_grid.size(); ++j) {
                const double x1 = d.r_grid[i] * std::cos(d.theta_grid[j]);
                const double x2 = d.r_grid[i] * std::sin(d.theta_grid[j]);
                out << fmt_double(x1) << ',' << fmt_double(x2) << ','
                    << fmt_double(d.values2d(i, j)) << '\n';
            }
    }
}

inline void write_samples_csv(const SampleSet& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_samples_csv: cannot open " + path);
    out << "# measure_id=" << s.measure_id << ",seed=" << s.seed << ",N=" << s.size() << '\n';
    out << (s.dim() == 1 ? "x1" : "x1,x2") << '\n';
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        out << fmt_double(s.points(i, 0));
        for (int j = 1; j < s.dim(); ++j) out << ',' << fmt_double(s.points(i, j));
        out << '\n';
    }
}

inline void write_assignment_csv(const Assignment& a, const Eigen::MatrixXd& cost,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_assignment_csv: cannot open " + path);
    out << "i,sigma_i,sq_cost_i\n";
    for (std::size_t i = 0; i < a.sigma.size(); ++i)
        out << i << ',' << a.sigma[i] << ','
            << fmt_double(cost(static_cast<Eigen::Index>(i), a.sigma[i])) << '\n';
}

inline void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "iter,loss,lr,is_best\n";
    for (std::size_t i = 0; i < h.loss.size(); ++i)
        out << i << ',' << fmt_double(h.loss[i]) << ',' << fmt_double(h.lr[i]) << ','
            << int(h.is_best[i]) << '\n';
}

// minimal CSV reader: splits lines on commas, skips '#' comment lines
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dpw
