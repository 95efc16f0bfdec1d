#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dpw {

// Supported sample spaces: a 1D interval, the closed unit disk in R^2, or a
// periodic cell [0,L)^d identified with the flat torus.
struct DomainSpec {
    enum class Kind { Interval, UnitDisk, PeriodicCell };

    Kind kind = Kind::Interval;
    int dim = 1;
    double lo = 0.0, hi = 1.0;  // interval
    double length = 1.0;        // periodic cell

    static DomainSpec interval(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("DomainSpec: interval requires lo < hi");
        DomainSpec d;
        d.kind = Kind::Interval;
        d.dim = 1;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    static DomainSpec unit_disk() {
        DomainSpec d;
        d.kind = Kind::UnitDisk;
        d.dim = 2;
        return d;
    }
    static DomainSpec periodic_cell(double L, int dim = 1) {
        if (!(L > 0.0)) throw std::invalid_argument("DomainSpec: periodic cell requires L > 0");
        DomainSpec d;
        d.kind = Kind::PeriodicCell;
        d.dim = dim;
        d.length = L;
        d.lo = 0.0;
        d.hi = L;
        return d;
    }

    bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const {
        switch (kind) {
            case Kind::Interval:
                return x.size() == 1 && x[0] >= lo - tol && x[0] <= hi + tol;
            case Kind::UnitDisk:
                return x.size() == 2 && x.norm() <= 1.0 + tol;
            case Kind::PeriodicCell:
                return x.size() == dim && (x.array() >= -tol).all() &&
                       (x.array() <= length + tol).all();
        }
        return false;
    }
};

// A normalized density tabulated on a grid. 1D (interval or periodic cell)
// carries a node grid, values, and a cumulative distribution; the disk case
// carries a polar grid plus an optional closed-form evaluator used wherever
// interpolation bias would matter (sampling, quadrature).
template <class Scalar>
struct TabulatedDensityT {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    DomainSpec domain;
    std::string id;

    // 1D storage
    Vec grid;    // strictly increasing nodes
    Vec values;  // nonnegative, trapezoid-integrates to 1
    Vec cdf;     // cdf[0]=0, cdf[n-1]=1, nondecreasing

    // disk storage (polar tabulation, values2d(i,j) at r_grid[i], theta_grid[j])
    Vec r_grid, theta_grid;
    Mat values2d;

    enum class Analytic { None, Disk2dParaboloid };
    Analytic analytic = Analytic::None;

    Scalar norm_constant = Scalar(1);  // the integral of the raw solution before normalizing

    bool is_1d() const { return domain.kind != DomainSpec::Kind::UnitDisk; }

    // Pointwise density. 1D: linear interpolation on the grid. Disk: the
    // closed-form expression when available, else bilinear in (r, theta).
    Scalar density_at(Scalar x) const {
        const Eigen::Index n = grid.size();
        if (x <= grid[0]) return values[0];
        if (x >= grid[n - 1]) return values[n - 1];
        Eigen::Index j = locate(grid, x);
        const Scalar t = (x - grid[j]) / (grid[j + 1] - grid[j]);
        return (Scalar(1) - t) * values[j] + t * values[j + 1];
    }

    Scalar density_at_disk(Scalar x1, Scalar x2) const {
        const Scalar r2 = x1 * x1 + x2 * x2;
        if (r2 > Scalar(1)) return Scalar(0);
        if (analytic == Analytic::Disk2dParaboloid)
            return (Scalar(2) / Scalar(EIGEN_PI)) * (Scalar(1) - r2);
        const Scalar r = std::sqrt(r2);
        Scalar th = std::atan2(x2, x1);
        if (th < Scalar(0)) th += Scalar(2 * EIGEN_PI);
        Eigen::Index i = locate(r_grid, r);
        Eigen::Index j = locate(theta_grid, th);
        const Scalar tr = (r - r_grid[i]) / (r_grid[i + 1] - r_grid[i]);
        const Scalar tt = (th - theta_grid[j]) / (theta_grid[j + 1] - theta_grid[j]);
        return (1 - tr) * ((1 - tt) * values2d(i, j) + tt * values2d(i, j + 1)) +
               tr * ((1 - tt) * values2d(i + 1, j) + tt * values2d(i + 1, j + 1));
    }

    // cdf by linear interpolation between nodes
    Scalar cdf_at(Scalar x) const {
        const Eigen::Index n = grid.size();
        if (x <= grid[0]) return Scalar(0);
        if (x >= grid[n - 1]) return Scalar(1);
        Eigen::Index j = locate(grid, x);
        const Scalar t = (x - grid[j]) / (grid[j + 1] - grid[j]);
        return (Scalar(1) - t) * cdf[j] + t * cdf[j + 1];
    }

    // monotone piecewise-linear inversion of the tabulated cdf
    Scalar quantile(Scalar u) const {
        const Eigen::Index n = cdf.size();
        if (u <= Scalar(0)) return grid[0];
        if (u >= Scalar(1)) return grid[n - 1];
        // binary search for the bracketing cdf cell
        Eigen::Index lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            if (cdf[mid] <= u) lo = mid; else hi = mid;
        }
        const Scalar df = cdf[hi] - cdf[lo];
        if (df <= Scalar(0)) return grid[lo];
        const Scalar t = (u - cdf[lo]) / df;
        return grid[lo] + t * (grid[hi] - grid[lo]);
    }

private:
    static Eigen::Index locate(const Vec& g, Scalar x) {
        Eigen::Index lo = 0, hi = g.size() - 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            if (g[mid] <= x) lo = mid; else hi = mid;
        }
        return lo;
    }
};

using TabulatedDensity = TabulatedDensityT<double>;

// An ordered collection of d-dimensional points drawn from one measure.
template <class Scalar>
struct SampleSetT {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Mat points;  // N x d
    std::string measure_id;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return points.rows(); }
    int dim() const { return static_cast<int>(points.cols()); }
};

using SampleSet = SampleSetT<double>;

}  // namespace dpw
