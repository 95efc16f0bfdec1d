#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpw/domain.hpp"
#include "dpw/rng.hpp"

namespace dpw {

// A permutation coupling source point i to target point sigma[i], together
// with the total squared transport cost it realizes.
struct Assignment {
    enum class Method { Sorted1d, ExactLp, MinibatchRefine, BruteForce };

    std::vector<Eigen::Index> sigma;
    double total_sq_cost = 0.0;
    Method method = Method::ExactLp;
};

struct W2Result {
    double value = 0.0;
    Assignment assignment;
    bool exact = true;
};

namespace detail {

// compensated (Kahan) accumulation; used for RMS stability at large N
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

inline double pair_sq_dist(const Eigen::MatrixXd& xs, Eigen::Index i, const Eigen::MatrixXd& ys,
                           Eigen::Index j) {
    return (xs.row(i) - ys.row(j)).squaredNorm();
}

inline double total_cost(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                         const std::vector<Eigen::Index>& sigma) {
    KahanSum s;
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
        s.add(pair_sq_dist(xs, i, ys, sigma[static_cast<std::size_t>(i)]));
    return s.value();
}

}  // namespace detail

inline Eigen::MatrixXd squared_cost_matrix(const SampleSet& xs, const SampleSet& ys) {
    const Eigen::Index n = xs.size(), m = ys.size();
    Eigen::MatrixXd c(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            c(i, j) = detail::pair_sq_dist(xs.points, i, ys.points, j);
    return c;
}

// Exact 1D Wasserstein-2 between equal-size clouds: sort both sides and pair
// order statistics.
inline W2Result w2_1d(const SampleSet& xs, const SampleSet& ys) {
    if (xs.dim() != 1 || ys.dim() != 1) throw std::invalid_argument("w2_1d: d = 1 required");
    if (xs.size() != ys.size()) throw std::invalid_argument("w2_1d: size mismatch");
    const Eigen::Index n = xs.size();

    std::vector<Eigen::Index> ox(n), oy(n);
    std::iota(ox.begin(), ox.end(), 0);
    std::iota(oy.begin(), oy.end(), 0);
    std::sort(ox.begin(), ox.end(),
              [&](Eigen::Index a, Eigen::Index b) { return xs.points(a, 0) < xs.points(b, 0); });
    std::sort(oy.begin(), oy.end(),
              [&](Eigen::Index a, Eigen::Index b) { return ys.points(a, 0) < ys.points(b, 0); });

    W2Result r;
    r.assignment.method = Assignment::Method::Sorted1d;
    r.assignment.sigma.resize(n);
    detail::KahanSum cost;
    for (Eigen::Index k = 0; k < n; ++k) {
        r.assignment.sigma[static_cast<std::size_t>(ox[k])] = oy[k];
        const double d = xs.points(ox[k], 0) - ys.points(oy[k], 0);
        cost.add(d * d);
    }
    r.assignment.total_sq_cost = cost.value();
    r.value = std::sqrt(cost.value() / static_cast<double>(n));
    r.exact = true;
    return r;
}

// Minimum-cost assignment by shortest augmenting paths with potentials
// (Jonker-Volgenant family). Deterministic: columns are scanned in index
// order, strict improvement required, so ties break to the lowest index.
inline Assignment assignment_exact(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) throw std::invalid_argument("assignment_exact: square matrix required");
    if (!cost.allFinite()) throw std::invalid_argument("assignment_exact: non-finite entries");
    const double INF = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Eigen::Index> match(n + 1, n);  // match[col] = row, n = free
    std::vector<Eigen::Index> way(n + 1, n);

    for (Eigen::Index i = 0; i < n; ++i) {
        match[n] = i;
        Eigen::Index j0 = n;
        std::vector<double> minv(n + 1, INF);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = match[j0];
            double delta = INF;
            Eigen::Index j1 = n;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != n);
        // augment along the alternating path
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != n);
    }

    Assignment a;
    a.method = Assignment::Method::ExactLp;
    a.sigma.assign(static_cast<std::size_t>(n), 0);
    detail::KahanSum total;
    for (Eigen::Index j = 0; j < n; ++j) a.sigma[static_cast<std::size_t>(match[j])] = j;
    for (Eigen::Index i = 0; i < n; ++i)
        total.add(cost(i, a.sigma[static_cast<std::size_t>(i)]));
    a.total_sq_cost = total.value();
    return a;
}

// Exhaustive oracle over all n! permutations, n <= 9.
inline Assignment brute_force_assignment(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) throw std::invalid_argument("brute_force_assignment: square matrix required");
    if (n > 9) throw std::invalid_argument("brute_force_assignment: N <= 9 required");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Assignment best;
    best.method = Assignment::Method::BruteForce;
    best.total_sq_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
        if (c < best.total_sq_cost) {
            best.total_sq_cost = c;
            best.sigma = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Local refinement of a random initial permutation: each round draws a random
// index subset, re-solves the assignment restricted to the current pairs of
// that subset, and splices the improvement back in. The total cost is
// nonincreasing round by round.
inline Assignment assignment_minibatch_refine(const SampleSet& xs, const SampleSet& ys, int batch,
                                              int rounds, std::uint64_t seed) {
    const Eigen::Index n = xs.size();
    if (ys.size() != n) throw std::invalid_argument("assignment_minibatch_refine: size mismatch");
    if (batch < 2 || batch > n)
        throw std::invalid_argument("assignment_minibatch_refine: batch out of range [2, N]");

    RngStream rng(seed);
    Assignment a;
    a.method = (batch == n) ? Assignment::Method::ExactLp : Assignment::Method::MinibatchRefine;
    a.sigma.resize(static_cast<std::size_t>(n));
    std::iota(a.sigma.begin(), a.sigma.end(), 0);
    rng.shuffle(a.sigma);

    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    const Eigen::Index b = batch;
    Eigen::MatrixXd sub(b, b);
    for (int round = 0; round < rounds; ++round) {
        rng.shuffle(all);
        for (Eigen::Index p = 0; p < b; ++p)
            for (Eigen::Index q = 0; q < b; ++q)
                sub(p, q) = detail::pair_sq_dist(xs.points, all[static_cast<std::size_t>(p)],
                                                 ys.points,
                                                 a.sigma[static_cast<std::size_t>(all[static_cast<std::size_t>(q)])]);
        Assignment local = assignment_exact(sub);
        std::vector<Eigen::Index> old_targets(static_cast<std::size_t>(b));
        for (Eigen::Index q = 0; q < b; ++q)
            old_targets[static_cast<std::size_t>(q)] =
                a.sigma[static_cast<std::size_t>(all[static_cast<std::size_t>(q)])];
        for (Eigen::Index p = 0; p < b; ++p)
            a.sigma[static_cast<std::size_t>(all[static_cast<std::size_t>(p)])] =
                old_targets[static_cast<std::size_t>(local.sigma[static_cast<std::size_t>(p)])];
    }
    a.total_sq_cost = detail::total_cost(xs.points, ys.points, a.sigma);
    return a;
}

// W2 between equal-size point clouds.
struct W2Options {
    enum class Method { ExactLp, MinibatchRefine, SubsampleAvg };
    Method method = Method::ExactLp;
    // minibatch_refine
    int batch = 64;
    int rounds = 500;
    // subsample_avg
    int k = 10;
    Eigen::Index m = 1024;
    std::uint64_t seed = 0;
    Eigen::Index exact_cap = 4096;  // memory guard for the dense cost matrix
};

inline W2Result w2_point_clouds(const SampleSet& xs, const SampleSet& ys, const W2Options& opt) {
    using M = W2Options::Method;
    const Eigen::Index n = xs.size();
    if (xs.dim() != ys.dim()) throw std::invalid_argument("w2_point_clouds: dimension mismatch");

    if (opt.method == M::ExactLp || opt.method == M::MinibatchRefine) {
        if (ys.size() != n) throw std::invalid_argument("w2_point_clouds: size mismatch");
    }

    W2Result r;
    switch (opt.method) {
        case M::ExactLp: {
            if (n > opt.exact_cap)
                throw std::invalid_argument("w2_point_clouds: N exceeds exact_lp cap " +
                                            std::to_string(opt.exact_cap));
            if (xs.dim() == 1) return w2_1d(xs, ys);
            r.assignment = assignment_exact(squared_cost_matrix(xs, ys));
            r.value = std::sqrt(r.assignment.total_sq_cost / static_cast<double>(n));
            r.exact = true;
            return r;
        }
        case M::MinibatchRefine: {
            r.assignment = assignment_minibatch_refine(xs, ys, opt.batch, opt.rounds, opt.seed);
            r.value = std::sqrt(r.assignment.total_sq_cost / static_cast<double>(n));
            r.exact = (opt.batch == n);
            return r;
        }
        case M::SubsampleAvg: {
            if (opt.m > std::min(xs.size(), ys.size()))
                throw std::invalid_argument("w2_point_clouds: subsample size m exceeds cloud size");
            RngStream rng(opt.seed);
            double acc = 0.0;
            for (int rep = 0; rep < opt.k; ++rep) {
                SampleSet sx, sy;
                sx.points.resize(opt.m, xs.dim());
                sy.points.resize(opt.m, ys.dim());
                std::vector<Eigen::Index> ix(static_cast<std::size_t>(xs.size())),
                    iy(static_cast<std::size_t>(ys.size()));
                std::iota(ix.begin(), ix.end(), 0);
                std::iota(iy.begin(), iy.end(), 0);
                rng.shuffle(ix);
                rng.shuffle(iy);
                for (Eigen::Index i = 0; i < opt.m; ++i) {
                    sx.points.row(i) = xs.points.row(ix[static_cast<std::size_t>(i)]);
                    sy.points.row(i) = ys.points.row(iy[static_cast<std::size_t>(i)]);
                }
                W2Options sub = opt;
                sub.method = M::ExactLp;
                acc += w2_point_clouds(sx, sy, sub).value;
            }
            r.value = acc / opt.k;
            r.exact = false;
            return r;
        }
    }
    throw std::logic_error("w2_point_clouds: unknown method");
}

}  // namespace dpw
