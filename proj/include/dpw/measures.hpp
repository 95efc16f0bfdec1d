#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpw/domain.hpp"
#include "dpw/rng.hpp"

namespace dpw {

using ScalarFn = std::function<double(double)>;

// Coefficients of the 1D nondivergence operator  -a u'' + b u' + c u  on [lo,hi],
// with nonnegative forcing g and Dirichlet boundary values h0, h1.
struct EllipticCoeffs1D {
    double lo = 0.0, hi = 1.0;
    ScalarFn a;  // diffusion, >= lambda > 0
    ScalarFn b;  // drift
    ScalarFn c;  // potential, >= 0
    ScalarFn g;  // forcing, >= 0
    double h0 = 0.0, h1 = 0.0;
};

struct ParabolicCoeffs1D {
    EllipticCoeffs1D elliptic;
    ScalarFn rho_init;          // nonnegative initial data
    double t_end = 1.0;
    int time_steps = 100;
    double corner_tol = 1e-8;   // compatibility check at the two corners
};

struct TorusCoeffs1D {
    double length = 1.0;
    ScalarFn drift;       // periodic b
    ScalarFn diffusion;   // periodic kappa, kappa_minus <= kappa <= kappa_plus
    double kappa_minus = 1.0, kappa_plus = 1.0;
    double periodicity_tol = 1e-8;
};

namespace detail {

inline double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
        s += 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
    return s;
}

// Normalize a raw nonnegative solution into a TabulatedDensity with cdf.
// Negatives within clamp_tol are roundoff and are zeroed; anything worse is a
// discretization failure and throws.
inline TabulatedDensity normalize_1d(const DomainSpec& dom, const Eigen::VectorXd& grid,
                                     Eigen::VectorXd vals, const std::string& id,
                                     double clamp_tol = 1e-10) {
    const double min_v = vals.minCoeff();
    if (min_v < -clamp_tol)
        throw std::runtime_error("normalize_1d: solution value " + std::to_string(min_v) +
                                 " below -" + std::to_string(clamp_tol) +
                                 " violates the maximum principle; refine the grid");
    vals = vals.cwiseMax(0.0);
    const double mass = trapezoid(grid, vals);
    if (!(mass > 0.0)) throw std::runtime_error("normalize_1d: nonpositive total mass");
    vals /= mass;

    TabulatedDensity d;
    d.domain = dom;
    d.id = id;
    d.grid = grid;
    d.values = vals;
    d.norm_constant = mass;
    d.cdf.resize(grid.size());
    d.cdf[0] = 0.0;
    for (Eigen::Index i = 1; i < grid.size(); ++i)
        d.cdf[i] = d.cdf[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (vals[i] + vals[i - 1]);
    d.cdf /= d.cdf[grid.size() - 1];
    d.cdf[grid.size() - 1] = 1.0;
    return d;
}

// Thomas solve of a tridiagonal system; throws on a vanishing pivot with a
// crude condition estimate attached.
inline Eigen::VectorXd solve_tridiag(Eigen::VectorXd lower, Eigen::VectorXd diag,
                                     Eigen::VectorXd upper, Eigen::VectorXd rhs) {
    const Eigen::Index n = diag.size();
    const double scale = diag.cwiseAbs().maxCoeff() + lower.cwiseAbs().maxCoeff() +
                         upper.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(diag[i - 1]) < 1e-300)
            throw std::runtime_error("solve_tridiag: singular system (zero pivot)");
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    const double min_pivot = diag.cwiseAbs().minCoeff();
    if (min_pivot < 1e-14 * scale)
        throw std::runtime_error("solve_tridiag: singular linear system, condition estimate ~" +
                                 std::to_string(scale / std::max(min_pivot, 1e-300)));
    Eigen::VectorXd x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i)
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

// Assemble the interior rows of the central FD discretization of
// -a u'' + b u' + c u on a uniform grid.
struct Tridiag {
    Eigen::VectorXd lower, diag, upper;
};

inline Tridiag elliptic_operator_rows(const EllipticCoeffs1D& cf, const Eigen::VectorXd& grid) {
    const Eigen::Index n = grid.size();
    const double h = grid[1] - grid[0];
    Tridiag t;
    t.lower.setZero(n - 2);
    t.diag.setZero(n - 2);
    t.upper.setZero(n - 2);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const double x = grid[i];
        const double ai = cf.a(x), bi = cf.b ? cf.b(x) : 0.0, ci = cf.c ? cf.c(x) : 0.0;
        if (!(ai > 0.0)) throw std::invalid_argument("elliptic coefficients: a(x) must be positive");
        if (ci < 0.0) throw std::invalid_argument("elliptic coefficients: c(x) must be nonnegative");
        t.lower[i - 1] = -ai / (h * h) - bi / (2.0 * h);
        t.diag[i - 1] = 2.0 * ai / (h * h) + ci;
        t.upper[i - 1] = -ai / (h * h) + bi / (2.0 * h);
    }
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elliptic Dirichlet problem -a u'' + b u' + c u = g, u(lo)=h0, u(hi)=h1.
// Second-order central differences; returns the normalized solution density.
inline TabulatedDensity solve_elliptic_1d(const EllipticCoeffs1D& cf, int n_grid,
                                          const std::string& id = "elliptic_1d") {
    if (n_grid < 3) throw std::invalid_argument("solve_elliptic_1d: n_grid >= 3 required");
    if (cf.h0 < 0.0 || cf.h1 < 0.0)
        throw std::invalid_argument("solve_elliptic_1d: boundary data must be nonnegative");

    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n_grid, cf.lo, cf.hi);
    bool trivial = (cf.h0 == 0.0 && cf.h1 == 0.0);
    Eigen::VectorXd rhs(n_grid - 2);
    for (Eigen::Index i = 1; i + 1 < n_grid; ++i) {
        const double gi = cf.g ? cf.g(grid[i]) : 0.0;
        if (gi < 0.0) throw std::invalid_argument("solve_elliptic_1d: forcing must be nonnegative");
        if (gi != 0.0) trivial = false;
        rhs[i - 1] = gi;
    }
    if (trivial)
        throw std::invalid_argument("solve_elliptic_1d: trivial data (g == 0 and h0 == h1 == 0)");

    auto t = detail::elliptic_operator_rows(cf, grid);
    rhs[0] -= t.lower[0] * cf.h0;
    rhs[n_grid - 3] -= t.upper[n_grid - 3] * cf.h1;

    Eigen::VectorXd interior = detail::solve_tridiag(t.lower, t.diag, t.upper, rhs);
    Eigen::VectorXd u(n_grid);
    u[0] = cf.h0;
    u.segment(1, n_grid - 2) = interior;
    u[n_grid - 1] = cf.h1;
    return detail::normalize_1d(DomainSpec::interval(cf.lo, cf.hi), grid, u, id);
}

// Crank-Nicolson march of  du/dt + Lu = g  to t_end; returns the normalized
// terminal profile. Boundary values are held at h0, h1 for all times.
inline TabulatedDensity solve_parabolic_1d(const ParabolicCoeffs1D& pc, int n_grid,
                                           const std::string& id = "parabolic_1d") {
    if (n_grid < 3) throw std::invalid_argument("solve_parabolic_1d: n_grid >= 3 required");
    if (pc.time_steps < 1) throw std::invalid_argument("solve_parabolic_1d: time_steps >= 1");
    const EllipticCoeffs1D& cf = pc.elliptic;

    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n_grid, cf.lo, cf.hi);
    Eigen::VectorXd u(n_grid);
    for (Eigen::Index i = 0; i < n_grid; ++i) {
        u[i] = pc.rho_init(grid[i]);
        if (u[i] < -1e-12)
            throw std::invalid_argument("solve_parabolic_1d: rho_init must be nonnegative");
        if (u[i] < 0.0) u[i] = 0.0;  // roundoff from evaluating the initial data
    }
    if (std::abs(u[0] - cf.h0) > pc.corner_tol || std::abs(u[n_grid - 1] - cf.h1) > pc.corner_tol)
        throw std::invalid_argument("solve_parabolic_1d: corner compatibility rho_init(lo)=h0, rho_init(hi)=h1 violated");

    const double dt = pc.t_end / pc.time_steps;
    auto t = detail::elliptic_operator_rows(cf, grid);
    const Eigen::Index m = n_grid - 2;

    // (I + dt/2 L) u^{k+1} = (I - dt/2 L) u^k + dt (g + boundary terms)
    Eigen::VectorXd gl = -0.5 * dt * t.lower, gd = Eigen::VectorXd::Ones(m) - 0.5 * dt * t.diag,
                    gu = -0.5 * dt * t.upper;
    Eigen::VectorXd bc = Eigen::VectorXd::Zero(m);
    bc[0] = -dt * t.lower[0] * cf.h0;        // full dt: boundary constant in time
    bc[m - 1] = -dt * t.upper[m - 1] * cf.h1;
    Eigen::VectorXd forcing = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) forcing[i] = cf.g ? cf.g(grid[i + 1]) : 0.0;

    Eigen::VectorXd v = u.segment(1, m);
    for (int k = 0; k < pc.time_steps; ++k) {
        Eigen::VectorXd rhs(m);
        rhs[0] = gd[0] * v[0] + gu[0] * v[1];
        for (Eigen::Index i = 1; i + 1 < m; ++i)
            rhs[i] = gl[i] * v[i - 1] + gd[i] * v[i] + gu[i] * v[i + 1];
        rhs[m - 1] = gl[m - 1] * v[m - 2] + gd[m - 1] * v[m - 1];
        rhs += dt * forcing + bc;
        v = detail::solve_tridiag(0.5 * dt * t.lower,
                                  Eigen::VectorXd::Ones(m) + 0.5 * dt * t.diag,
                                  0.5 * dt * t.upper, rhs);
    }
    u[0] = cf.h0;
    u.segment(1, m) = v;
    u[n_grid - 1] = cf.h1;
    return detail::normalize_1d(DomainSpec::interval(cf.lo, cf.hi), grid, u, id);
}

// Stationary Fokker-Planck density on the 1D torus: (kappa m)'' - (b m)' = 0,
// periodic, with unit mass. The periodic FD matrix has a one-dimensional null
// space; we extract the null vector by replacing one (linearly dependent) row
// with the unit-mass constraint and solving the resulting sparse system.
inline TabulatedDensity solve_fp_invariant_1d(const TorusCoeffs1D& tc, int n_grid,
                                              const std::string& id = "fp_invariant_1d") {
    if (n_grid < 3) throw std::invalid_argument("solve_fp_invariant_1d: n_grid >= 3 required");
    if (!(tc.kappa_minus > 0.0))
        throw std::invalid_argument("solve_fp_invariant_1d: kappa_minus must be positive");
    const double L = tc.length;
    if (std::abs(tc.drift(0.0) - tc.drift(L)) > tc.periodicity_tol ||
        std::abs(tc.diffusion(0.0) - tc.diffusion(L)) > tc.periodicity_tol)
        throw std::invalid_argument("solve_fp_invariant_1d: coefficients are not L-periodic");

    const Eigen::Index n = n_grid;
    const double h = L / static_cast<double>(n);
    Eigen::VectorXd x(n), kap(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = i * h;
        kap[i] = tc.diffusion(x[i]);
        b[i] = tc.drift(x[i]);
        if (kap[i] < tc.kappa_minus - 1e-12 || kap[i] > tc.kappa_plus + 1e-12)
            throw std::invalid_argument("solve_fp_invariant_1d: kappa outside [kappa_minus, kappa_plus]");
    }

    // row i: (kap m)_{i+1} - 2 (kap m)_i + (kap m)_{i-1})/h^2 - ((b m)_{i+1} - (b m)_{i-1})/(2h)
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(4 * n));
    auto wrap = [n](Eigen::Index i) { return (i % n + n) % n; };
    for (Eigen::Index i = 1; i < n; ++i) {
        const Eigen::Index im = wrap(i - 1), ip = wrap(i + 1);
        trip.emplace_back(i, im, kap[im] / (h * h) + b[im] / (2.0 * h));
        trip.emplace_back(i, i, -2.0 * kap[i] / (h * h));
        trip.emplace_back(i, ip, kap[ip] / (h * h) - b[ip] / (2.0 * h));
    }
    // row 0 of the operator is minus the sum of the others (mass conservation);
    // replace it with the unit-mass constraint h * sum(m) = 1.
    for (Eigen::Index j = 0; j < n; ++j) trip.emplace_back(0, j, h);

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("solve_fp_invariant_1d: constrained system is singular "
                                 "(null space dimension != 1)");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[0] = 1.0;
    Eigen::VectorXd m = lu.solve(rhs);

    // residual of the replaced operator row confirms m spans the null space
    const Eigen::Index im = n - 1, ip = 1;
    const double r0 = (kap[im] * m[im] - 2.0 * kap[0] * m[0] + kap[ip] * m[ip]) / (h * h) -
                      (b[ip] * m[ip] - b[im] * m[im]) / (2.0 * h);
    const double scale = (kap.cwiseAbs().maxCoeff() / (h * h)) * m.cwiseAbs().maxCoeff();
    if (std::abs(r0) > 1e-8 * scale)
        throw std::runtime_error("solve_fp_invariant_1d: null-space residual too large "
                                 "(null space dimension != 1?)");
    if (m.minCoeff() <= 0.0)
        throw std::runtime_error("solve_fp_invariant_1d: invariant density not strictly positive");

    // append the wrap-around node so the tabulation covers the closed cell
    Eigen::VectorXd grid(n + 1), vals(n + 1);
    grid.head(n) = x;
    grid[n] = L;
    vals.head(n) = m;
    vals[n] = m[0];
    return detail::normalize_1d(DomainSpec::periodic_cell(L, 1), grid, vals, id);
}

// Drift of the tilted diffusion arising in KPP front-speed computations:
// x -> 2 alpha e + v(x), with |e| = 1.
inline ScalarFn kpp_tilted_drift(ScalarFn v, double alpha, double e) {
    if (!(alpha > 0.0)) throw std::invalid_argument("kpp_tilted_drift: alpha must be positive");
    if (std::abs(std::abs(e) - 1.0) > 1e-12)
        throw std::invalid_argument("kpp_tilted_drift: |e| must be 1");
    return [v = std::move(v), alpha, e](double x) { return 2.0 * alpha * e + v(x); };
}

// Closed-form 1D model target: density x + 1/2 on [0,1], cdf (y^2 + y)/2.
inline TabulatedDensity closed_form_1d(int n_grid = 2001) {
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n_grid, 0.0, 1.0);
    Eigen::VectorXd vals = grid.array() + 0.5;
    auto d = detail::normalize_1d(DomainSpec::interval(0.0, 1.0), grid, vals, "closed_form_1d");
    // affine density: the trapezoid cdf is exact, overwrite with the closed form
    for (Eigen::Index i = 0; i < n_grid; ++i)
        d.cdf[i] = 0.5 * (grid[i] * grid[i] + grid[i]);
    d.cdf[n_grid - 1] = 1.0;
    return d;
}

// Closed-form 2D model target: (2/pi)(1 - |x|^2) on the unit disk.
inline TabulatedDensity closed_form_2d(int n_r = 101, int n_theta = 129) {
    TabulatedDensity d;
    d.domain = DomainSpec::unit_disk();
    d.id = "closed_form_2d";
    d.analytic = TabulatedDensity::Analytic::Disk2dParaboloid;
    d.r_grid = Eigen::VectorXd::LinSpaced(n_r, 0.0, 1.0);
    d.theta_grid = Eigen::VectorXd::LinSpaced(n_theta, 0.0, 2.0 * EIGEN_PI);
    d.values2d.resize(n_r, n_theta);
    for (int i = 0; i < n_r; ++i)
        d.values2d.row(i).setConstant((2.0 / EIGEN_PI) * (1.0 - d.r_grid[i] * d.r_grid[i]));
    d.norm_constant = EIGEN_PI / 8.0;  // integral of the raw solution (1-|x|^2)/4 over the disk
    return d;
}

// Quadratic-cost optimal transport map for the 1D model problem:
// T(x) = (-1 + sqrt(1 + 8x)) / 2, monotone with T' <= 2.
inline double exact_map_1d(double x) {
    if (x < -1e-12 || x > 1.0 + 1e-12)
        throw std::invalid_argument("exact_map_1d: x outside [0,1]");
    return 0.5 * (-1.0 + std::sqrt(1.0 + 8.0 * std::min(std::max(x, 0.0), 1.0)));
}

// ---------------------------------------------------------------------------
// Sampling

// N points F^{-1}(U_i) with U_i i.i.d. uniform from the seeded stream.
inline SampleSet sample_inverse_cdf(const TabulatedDensity& density, Eigen::Index N,
                                    std::uint64_t seed) {
    if (!density.is_1d() || density.cdf.size() == 0)
        throw std::invalid_argument("sample_inverse_cdf: 1D density with populated cdf required");
    if (N < 1) throw std::invalid_argument("sample_inverse_cdf: N >= 1 required");
    RngStream rng(seed);
    SampleSet s;
    s.points.resize(N, 1);
    for (Eigen::Index i = 0; i < N; ++i) s.points(i, 0) = density.quantile(rng.uniform());
    s.measure_id = density.id;
    s.seed = seed;
    return s;
}

// Rejection sampling on the unit disk from the uniform proposal with envelope
// constant env: accept with probability density / env.
inline SampleSet sample_rejection_disk(const TabulatedDensity& density, Eigen::Index N,
                                       std::uint64_t seed, double env) {
    if (density.domain.kind != DomainSpec::Kind::UnitDisk)
        throw std::invalid_argument("sample_rejection_disk: disk density required");
    if (N < 1) throw std::invalid_argument("sample_rejection_disk: N >= 1 required");
    RngStream rng(seed);
    SampleSet s;
    s.points.resize(N, 2);
    for (Eigen::Index i = 0; i < N;) {
        // uniform point in the disk by rejection from the square
        double x1, x2;
        do {
            x1 = rng.uniform(-1.0, 1.0);
            x2 = rng.uniform(-1.0, 1.0);
        } while (x1 * x1 + x2 * x2 > 1.0);
        const double f = density.density_at_disk(x1, x2);
        if (f > env * (1.0 + 1e-12))
            throw std::runtime_error("sample_rejection_disk: envelope violated (density > env)");
        if (rng.uniform() <= f / env) {
            s.points(i, 0) = x1;
            s.points(i, 1) = x2;
            ++i;
        }
    }
    s.measure_id = density.id;
    s.seed = seed;
    return s;
}

// Uniform source measures
inline SampleSet sample_uniform_interval(double lo, double hi, Eigen::Index N, std::uint64_t seed,
                                         const std::string& id = "uniform_interval") {
    RngStream rng(seed);
    SampleSet s;
    s.points.resize(N, 1);
    for (Eigen::Index i = 0; i < N; ++i) s.points(i, 0) = rng.uniform(lo, hi);
    s.measure_id = id;
    s.seed = seed;
    return s;
}

inline SampleSet sample_uniform_disk(Eigen::Index N, std::uint64_t seed,
                                     const std::string& id = "uniform_disk") {
    RngStream rng(seed);
    SampleSet s;
    s.points.resize(N, 2);
    for (Eigen::Index i = 0; i < N;) {
        const double x1 = rng.uniform(-1.0, 1.0), x2 = rng.uniform(-1.0, 1.0);
        if (x1 * x1 + x2 * x2 <= 1.0) {
            s.points(i, 0) = x1;
            s.points(i, 1) = x2;
            ++i;
        }
    }
    s.measure_id = id;
    s.seed = seed;
    return s;
}

// Uniform density on [lo,hi] as a TabulatedDensity (identity-cdf special case).
inline TabulatedDensity uniform_density_1d(double lo = 0.0, double hi = 1.0, int n_grid = 1001) {
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n_grid, lo, hi);
    Eigen::VectorXd vals = Eigen::VectorXd::Constant(n_grid, 1.0 / (hi - lo));
    return detail::normalize_1d(DomainSpec::interval(lo, hi), grid, vals, "uniform_1d");
}

}  // namespace dpw
