// Acceptance gate: every release criterion evaluated end to end, one PASS/FAIL
// line each. Exits nonzero if any criterion fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpw/config.hpp"
#include "dpw/csv.hpp"
#include "dpw/measures.hpp"
#include "dpw/risk.hpp"
#include "dpw/sweep.hpp"
#include "dpw/trainer.hpp"

#ifndef DPW_CONFIG_DIR
#define DPW_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace dpw;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const double kJ2Closed = (20.0 - 9.0 * std::log(3.0)) / 64.0;

// ---------------------------------------------------------------------------
void criterion_3_j2() {
    const double j2u = j2_functional(uniform_density_1d(0.0, 1.0, 10001));
    const double j2c = j2_functional(closed_form_1d(10000));
    const double eu = std::abs(j2u - 1.0 / 6.0), ec = std::abs(j2c - kJ2Closed);
    std::ostringstream d;
    d << "uniform err " << eu << ", model err " << ec;
    report(3, "J2 functional values", eu <= 1e-8 && ec <= 1e-6, d.str());
}

void criterion_4_statistical_bounds() {
    const TabulatedDensity mu = uniform_density_1d(0.0, 1.0, 4001);
    const TabulatedDensity nu = closed_form_1d();
    bool ok = true;
    std::ostringstream d;
    for (Eigen::Index n : {9, 99, 999}) {
        const StatTermResult ru = stat_term_mc(mu, n, 500, 0x5741ULL + static_cast<std::uint64_t>(n));
        const double bu = 1.0 / std::sqrt(3.0 * (n + 1.0));
        const StatTermResult rv = stat_term_mc(nu, n, 500, 0x5742ULL + static_cast<std::uint64_t>(n));
        const double bv = std::sqrt(2.0 * kJ2Closed / (n + 1.0));
        ok = ok && ru.mean <= bu + 3.0 * ru.std_error && rv.mean <= bv + 3.0 * rv.std_error;
        d << "N=" << n << " mu " << ru.mean << "<=" << bu << " nu " << rv.mean << "<=" << bv << "; ";
    }
    report(4, "empirical Wasserstein bounds", ok, d.str());
}

void criterion_5_assignment_oracle() {
    RngStream rng(0x414FULL);
    bool ok = true;
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_index(7));
        Eigen::MatrixXd c(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) c(i, j) = rng.uniform();
        const Assignment fast = assignment_exact(c);
        const Assignment slow = brute_force_assignment(c);
        detail::KahanSum slow_total;
        for (Eigen::Index i = 0; i < n; ++i)
            slow_total.add(c(i, slow.sigma[static_cast<std::size_t>(i)]));
        if (fast.sigma != slow.sigma || fast.total_sq_cost != slow_total.value()) {
            ok = false;
            break;
        }
        ++checked;
    }
    report(5, "assignment oracle equivalence", ok,
           std::to_string(checked) + "/200 matrices matched exactly");
}

void criterion_6_gradients() {
    RngStream rng(0x6772ULL);
    bool ok = true;
    double worst = 0.0;
    for (int inst = 0; inst < 50 && ok; ++inst) {
        const int d_in = 1 + static_cast<int>(rng.uniform_index(2));
        const int d_out = 1 + static_cast<int>(rng.uniform_index(2));
        const int h1 = 4 + static_cast<int>(rng.uniform_index(13));
        const int h2 = 4 + static_cast<int>(rng.uniform_index(13));
        TransportNet net = init_net({d_in, h1, h2, d_out}, 0x1000ULL + inst);
        // generic point in parameter space: keep pre-activations off the kink
        for (auto& b : net.biases)
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);
        const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.uniform_index(4));
        Eigen::MatrixXd xs(d_in, B), ys(d_out, B);
        for (Eigen::Index c = 0; c < B; ++c) {
            for (int r = 0; r < d_in; ++r) xs(r, c) = rng.uniform(-1.0, 1.0);
            for (int r = 0; r < d_out; ++r) ys(r, c) = rng.uniform(-1.0, 1.0);
        }
        NetGrad g;
        loss_and_grad(net, xs, ys, g);
        const double h = 1e-5;
        auto probe = [&](std::size_t l, Eigen::Index i, Eigen::Index j, bool bias, double an) {
            auto shift = [&](double delta) {
                if (bias)
                    net.biases[l][i] += delta;
                else
                    net.weights[l](i, j) += delta;
            };
            NetGrad tmp;
            shift(h);
            const double up = loss_and_grad(net, xs, ys, tmp);
            shift(-2.0 * h);
            const double dn = loss_and_grad(net, xs, ys, tmp);
            shift(h);
            const double fd = (up - dn) / (2.0 * h);
            const double err = std::abs(an - fd) / std::max(std::abs(fd), 1e-8 / 1e-5);
            worst = std::max(worst, err);
            if (err > 1e-5 && std::abs(an - fd) > 1e-8) ok = false;
        };
        for (std::size_t l = 0; l < net.n_layers() && ok; ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].rows() && ok; ++i)
                for (Eigen::Index j = 0; j < net.weights[l].cols() && ok; ++j)
                    probe(l, i, j, false, g.d_weights[l](i, j));
            for (Eigen::Index i = 0; i < net.biases[l].size() && ok; ++i)
                probe(l, i, 0, true, g.d_biases[l][i]);
        }
    }
    std::ostringstream d;
    d << "worst relative deviation " << worst;
    report(6, "gradient correctness vs central differences", ok, d.str());
}

void criterion_7_doubling() {
    // uniform 1D: every trial ratio is exactly 2; check explicitly per trial
    bool uniform_ok = true;
    {
        const TabulatedDensity u = uniform_density_1d();
        RngStream rng(0xD0B1ULL);
        for (int t = 0; t < 10000; ++t) {
            const double c = rng.uniform(0.1, 0.9);
            const double r = rng.uniform(0.0, std::min(c, 1.0 - c));
            const double full = u.cdf_at(c + r) - u.cdf_at(c - r);
            const double half = u.cdf_at(c + 0.5 * r) - u.cdf_at(c - 0.5 * r);
            if (half <= 0.0 || std::abs(full / half - 2.0) > 1e-9) {
                uniform_ok = false;
                break;
            }
        }
    }
    const DoublingProbeResult r1 = doubling_probe(closed_form_1d(), 10000, 0xD0B2ULL);
    const DoublingProbeResult r2 = doubling_probe(closed_form_2d(), 10000, 0xD0B3ULL);
    std::ostringstream d;
    d << "uniform exact, x+1/2 max " << r1.max_ratio << " <= 6, disk max " << r2.max_ratio
      << " <= 16";
    report(7, "doubling probes", uniform_ok && r1.max_ratio <= 6.0 && r2.max_ratio <= 16.0,
           d.str());
}

void criterion_8_holder() {
    auto map = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, exact_map_1d(x[0]));
    };
    const HolderEstimate h = holder_probe(map, DomainSpec::interval(0.0, 1.0), 4000, 0x484FULL);
    std::ostringstream d;
    d << "beta " << h.beta << ", constant " << h.constant;
    report(8, "Holder probe on the exact 1D map", h.beta >= 0.95 && h.beta <= 1.0 && h.constant <= 2.2,
           d.str());
}

void criterion_9_ood() {
    const TabulatedDensity nu = closed_form_1d();
    // shifted target: linear density 0.8x + 0.6 from pure boundary data
    EllipticCoeffs1D cf;
    cf.a = [](double) { return 1.0; };
    cf.h0 = 0.6;
    cf.h1 = 1.4;
    const TabulatedDensity nu_shift = solve_elliptic_1d(cf, 2001, "shifted_1d");

    SampleSet xs = sample_uniform_interval(0.0, 1.0, 512, 0x4F01ULL);
    SampleSet ys = sample_inverse_cdf(nu, 512, 0x4F02ULL);
    TrainConfig cfg;
    cfg.max_iters = 3000;
    cfg.patience = 1500;
    cfg.seed = 0x4F03ULL;
    auto [net, hist] = train(xs, ys, init_net({1, 64, 64, 1}, 0x4F04ULL), cfg);

    bool ok = true;
    double worst_slack = 1e300;
    for (int run = 0; run < 5; ++run) {
        const std::uint64_t s = 0x4F10ULL + 10ULL * static_cast<std::uint64_t>(run);
        SampleSet mu_v = sample_uniform_interval(0.0, 1.0, 4096, s);
        SampleSet nu_v = sample_inverse_cdf(nu, 4096, s + 1);
        SampleSet same = sample_inverse_cdf(nu, 4096, s + 2);
        SampleSet shifted = sample_inverse_cdf(nu_shift, 4096, s + 3);
        SampleSet point;
        point.points = Eigen::MatrixXd::Constant(4096, 1, 0.5);
        for (const SampleSet* nu1 : {&same, &shifted, &point}) {
            const OodResult r = ood_check(net, mu_v, nu_v, *nu1);
            worst_slack = std::min(worst_slack, r.slack);
            if (r.slack < -r.tolerance) ok = false;
        }
    }
    std::ostringstream d;
    d << "3 targets x 5 runs, worst slack " << worst_slack;
    report(9, "OOD target-shift inequality", ok, d.str());
}

void criterion_10_solvers() {
    bool ok = true;
    std::ostringstream d;

    EllipticCoeffs1D lin;
    lin.a = [](double) { return 1.0; };
    lin.h0 = 0.5;
    lin.h1 = 1.5;
    const TabulatedDensity d1 = solve_elliptic_1d(lin, 101);
    double e1 = 0.0;
    for (Eigen::Index i = 0; i < d1.grid.size(); ++i)
        e1 = std::max(e1, std::abs(d1.values[i] - (d1.grid[i] + 0.5)));
    ok = ok && e1 <= 1e-10;
    d << "elliptic linear " << e1;

    EllipticCoeffs1D quad;
    quad.a = [](double) { return 1.0; };
    quad.g = [](double) { return 1.0; };
    const TabulatedDensity d2 = solve_elliptic_1d(quad, 101);
    double e2 = 0.0;
    for (Eigen::Index i = 0; i < d2.grid.size(); ++i)
        e2 = std::max(e2, std::abs(d2.norm_constant * d2.values[i] -
                                   0.5 * d2.grid[i] * (1.0 - d2.grid[i])));
    ok = ok && e2 <= 1e-10;
    d << ", elliptic quadratic " << e2;

    TorusCoeffs1D flat;
    flat.drift = [](double) { return 0.0; };
    flat.diffusion = [](double) { return 1.0; };
    const TabulatedDensity d3 = solve_fp_invariant_1d(flat, 512);
    const double e3 = (d3.values.array() - 1.0).abs().maxCoeff();
    ok = ok && e3 <= 1e-10;
    d << ", FP uniform " << e3;

    TorusCoeffs1D gibbs;
    gibbs.drift = [](double x) { return 2.0 * EIGEN_PI * std::sin(2.0 * EIGEN_PI * x); };
    gibbs.diffusion = [](double) { return 1.0; };
    const TabulatedDensity d4 = solve_fp_invariant_1d(gibbs, 2048);
    Eigen::VectorXd ref(d4.grid.size());
    for (Eigen::Index i = 0; i < d4.grid.size(); ++i)
        ref[i] = std::exp(-std::cos(2.0 * EIGEN_PI * d4.grid[i]));
    double mass = 0.0;
    for (Eigen::Index i = 0; i + 1 < d4.grid.size(); ++i)
        mass += 0.5 * (d4.grid[i + 1] - d4.grid[i]) * (ref[i] + ref[i + 1]);
    const double e4 = (d4.values - ref / mass).cwiseAbs().maxCoeff();
    ok = ok && e4 <= 1e-4;
    d << ", FP Gibbs " << e4;

    ParabolicCoeffs1D pc;
    pc.elliptic.a = [](double) { return 1.0; };
    pc.rho_init = [](double x) { return std::sin(EIGEN_PI * x); };
    pc.t_end = 0.1;
    pc.time_steps = 400;
    const TabulatedDensity d5 = solve_parabolic_1d(pc, 401);
    double e5 = 0.0;
    for (Eigen::Index i = 0; i < d5.grid.size(); ++i)
        e5 = std::max(
            e5, std::abs(d5.values[i] - 0.5 * static_cast<double>(EIGEN_PI) *
                                            std::sin(static_cast<double>(EIGEN_PI) * d5.grid[i])));
    ok = ok && e5 <= 1e-4;
    d << ", parabolic sine " << e5;

    report(10, "PDE solver exactness", ok, d.str());
}

void criterion_11_lipschitz() {
    bool ok = true;
    double tightest = 1e300;
    for (int k = 0; k < 20 && ok; ++k) {
        const int dim = (k % 2 == 0) ? 1 : 2;
        TransportNet net = init_net({dim, 32, 32, dim}, 0xA000ULL + static_cast<std::uint64_t>(k));
        if (k >= 10) {
            // second half: briefly trained nets
            SampleSet xs = (dim == 1) ? sample_uniform_interval(0.0, 1.0, 64, 0xB000ULL + k)
                                      : sample_uniform_disk(64, 0xB000ULL + k);
            SampleSet ys = (dim == 1)
                               ? sample_inverse_cdf(closed_form_1d(), 64, 0xC000ULL + k)
                               : sample_rejection_disk(closed_form_2d(), 64, 0xC000ULL + k,
                                                      2.0 / EIGEN_PI);
            TrainConfig cfg;
            cfg.max_iters = 200;
            cfg.patience = 200;
            cfg.seed = 0xD000ULL + k;
            auto [trained, hist] = train(xs, ys, std::move(net), cfg);
            net = std::move(trained);
        }
        const double bound = lipschitz_upper_bound(net);
        RngStream rng(0xE000ULL + static_cast<std::uint64_t>(k));
        double worst = 0.0;
        for (int t = 0; t < 10000; ++t) {
            Eigen::VectorXd a(dim), b(dim);
            for (int i = 0; i < dim; ++i) {
                a[i] = rng.uniform(-1.0, 1.0);
                b[i] = rng.uniform(-1.0, 1.0);
            }
            const double dx = (a - b).norm();
            if (dx == 0.0) continue;
            worst = std::max(worst, (forward(net, a) - forward(net, b)).norm() / dx);
        }
        if (bound < worst) ok = false;
        tightest = std::min(tightest, bound - worst);
    }
    std::ostringstream d;
    d << "20 nets, smallest margin " << tightest;
    report(11, "Lipschitz certification", ok, d.str());
}

// ---------------------------------------------------------------------------
ExperimentConfig desk_config(const std::string& file, const std::string& out) {
    FlatConfig fc = FlatConfig::parse_file((fs::path(DPW_CONFIG_DIR) / file).string());
    ExperimentConfig ec = ExperimentConfig::from_config(fc);
    ec.out_dir = out;
    return ec;
}

RateFit criterion_1_sweep_1d(const std::string& out) {
    const ExperimentConfig ec = desk_config("paper_1d_desk.cfg", out);
    const RateFit fit = rate_sweep(ec, ec.out_dir);
    std::ostringstream d;
    d << "slope " << fit.slope << " in [-0.65, -0.38], excluded " << fit.excluded_runs;
    report(1, "1D rate reproduction (desk scale)", fit.slope >= -0.65 && fit.slope <= -0.38,
           d.str());
    return fit;
}

void criterion_12_determinism(const std::string& dir_a) {
    const std::string dir_b = dir_a + "_rerun";
    const ExperimentConfig ec = desk_config("paper_1d_desk.cfg", dir_b);
    rate_sweep(ec, ec.out_dir);
    bool ok = true;
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(dir_a) / "runs")) {
        const fs::path other = fs::path(dir_b) / "runs" / entry.path().filename();
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
            ok = false;
            break;
        }
        ++compared;
    }
    ok = ok && compared == static_cast<int>(ec.n_list.size()) * ec.repeats;
    report(12, "determinism of the desk sweep", ok,
           std::to_string(compared) + " per-run CSV bodies byte-identical");
}

void criterion_2_sweep_2d(const std::string& out) {
    const ExperimentConfig ec = desk_config("paper_2d_desk.cfg", out);
    const RateFit fit = rate_sweep(ec, ec.out_dir);
    std::ostringstream d;
    d << "slope " << fit.slope << " <= -0.18, excluded " << fit.excluded_runs;
    report(2, "2D rate reproduction (desk scale)", fit.slope <= -0.18, d.str());
}

}  // namespace

int main() {
    const std::string out_root = "acceptance_out";
    fs::create_directories(out_root);

    criterion_3_j2();
    criterion_4_statistical_bounds();
    criterion_5_assignment_oracle();
    criterion_6_gradients();
    criterion_7_doubling();
    criterion_8_holder();
    criterion_9_ood();
    criterion_10_solvers();
    criterion_11_lipschitz();
    criterion_1_sweep_1d(out_root + "/sweep_1d");
    criterion_12_determinism(out_root + "/sweep_1d");
    criterion_2_sweep_2d(out_root + "/sweep_2d");

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
