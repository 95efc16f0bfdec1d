// dpw: experiment driver for PDE-induced measures, transport-guided training,
// and rate sweeps. Every command writes CSV artifacts plus a manifest; reruns
// with the same config and seed reproduce byte-identical CSV bodies.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dpw/config.hpp"
#include "dpw/csv.hpp"
#include "dpw/measures.hpp"
#include "dpw/risk.hpp"
#include "dpw/sweep.hpp"
#include "dpw/svg.hpp"
#include "dpw/trainer.hpp"

namespace fs = std::filesystem;
using namespace dpw;

namespace {

constexpr const char* kVersion = "dpw 1.0.0";

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_echo) {
    fs::create_directories(dir);
    std::ofstream mf((fs::path(dir) / "manifest.txt").string());
    mf << "# manifest: " << command << "\nversion = " << kVersion << "\neigen = "
       << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
       << "\nconfig_hash = " << fnv1a(config_echo) << "\n\n"
       << config_echo;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    mf << "\nwall_clock_unix = "
       << std::chrono::duration_cast<std::chrono::seconds>(now).count() << "\n";
}

// preset measures addressable from the command line
TabulatedDensity make_measure(const std::string& id, int grid) {
    if (id == "uniform1d") return uniform_density_1d(0.0, 1.0, grid);
    if (id == "closed1d") return closed_form_1d(grid);
    if (id == "closed2d") return closed_form_2d();
    if (id == "elliptic") {
        EllipticCoeffs1D cf;
        cf.a = [](double) { return 1.0; };
        cf.g = [](double) { return 1.0; };
        return solve_elliptic_1d(cf, grid, "elliptic_demo");
    }
    if (id == "parabolic") {
        ParabolicCoeffs1D pc;
        pc.elliptic.a = [](double) { return 1.0; };
        pc.rho_init = [](double x) { return std::sin(EIGEN_PI * x); };
        pc.t_end = 0.1;
        pc.time_steps = 200;
        return solve_parabolic_1d(pc, grid, "parabolic_demo");
    }
    if (id == "fp_gibbs") {
        TorusCoeffs1D tc;
        tc.drift = [](double x) { return 2.0 * EIGEN_PI * std::sin(2.0 * EIGEN_PI * x); };
        tc.diffusion = [](double) { return 1.0; };
        tc.kappa_minus = tc.kappa_plus = 1.0;
        return solve_fp_invariant_1d(tc, grid, "fp_gibbs");
    }
    throw CLI::ValidationError("--measure", "unknown measure id " + id);
}

ExperimentConfig load_experiment(const std::string& config_path, std::uint64_t seed_override,
                                 const std::string& out_override, int workers_override,
                                 const std::string& method_override) {
    FlatConfig fc = FlatConfig::parse_file(config_path);
    ExperimentConfig ec = ExperimentConfig::from_config(fc);
    if (seed_override) ec.master_seed = seed_override;
    if (!out_override.empty()) ec.out_dir = out_override;
    if (workers_override > 0) ec.workers = workers_override;
    if (!method_override.empty()) {
        if (method_override != "exact" && method_override != "minibatch" &&
            method_override != "subsample")
            throw CLI::ValidationError("--method", "must be exact|minibatch|subsample");
        ec.transport_method = method_override;
    }
    return ec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PDE-induced measures, Wasserstein-guided pushforward training, rate sweeps"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", measure = "closed1d", method, example = "1d";
    std::uint64_t seed = 1;
    long n_points = 1000, trials = 10000, grid = 2001;
    int workers = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* c_solve = app.add_subcommand("solve", "solve a PDE and tabulate the induced density");
    c_solve->add_option("--measure", measure,
                        "uniform1d|closed1d|closed2d|elliptic|parabolic|fp_gibbs");
    c_solve->add_option("--grid", grid, "grid nodes")->check(CLI::PositiveNumber);
    add_common(c_solve);

    auto* c_sample = app.add_subcommand("sample", "draw N samples from a measure");
    c_sample->add_option("--measure", measure,
                         "uniform1d|closed1d|closed2d|elliptic|parabolic|fp_gibbs");
    c_sample->add_option("--n", n_points, "sample count")->check(CLI::PositiveNumber);
    c_sample->add_option("--grid", grid, "grid nodes for the tabulated density");
    add_common(c_sample);

    auto* c_train = app.add_subcommand("train", "train one pushforward map");
    c_train->add_option("--example", example, "1d|2d");
    c_train->add_option("--n", n_points, "training sample count")->check(CLI::PositiveNumber);
    c_train->add_option("--config", config_path, "experiment config for training settings");
    add_common(c_train);

    auto* c_sweep = app.add_subcommand("sweep", "run a full (N, repeat) rate sweep");
    c_sweep->add_option("--config", config_path, "experiment config")->required();
    c_sweep->add_option("--workers", workers, "worker pool size");
    c_sweep->add_option("--method", method, "exact|minibatch|subsample");
    add_common(c_sweep);

    auto* c_pd = app.add_subcommand("probe-doubling", "doubling-constant probe on a measure");
    c_pd->add_option("--measure", measure, "uniform1d|closed1d|closed2d|elliptic|fp_gibbs");
    c_pd->add_option("--trials", trials, "ellipsoid trials")->check(CLI::PositiveNumber);
    c_pd->add_option("--grid", grid, "grid nodes");
    add_common(c_pd);

    auto* c_ph = app.add_subcommand("probe-holder", "Holder modulus probe on the exact 1D map");
    c_ph->add_option("--n", n_points, "pair budget")->check(CLI::PositiveNumber);
    add_common(c_ph);

    auto* c_ood = app.add_subcommand("ood", "target-shift inequality check on a trained 1D map");
    c_ood->add_option("--n", n_points, "training sample count")->check(CLI::PositiveNumber);
    add_common(c_ood);

    std::string report_dir;
    auto* c_report = app.add_subcommand("report", "aggregate sweep artifacts into a rate table");
    c_report->add_option("--dir", report_dir, "directory holding sweep outputs")->required();
    c_report->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*c_solve) {
            const TabulatedDensity d = make_measure(measure, static_cast<int>(grid));
            fs::create_directories(out_dir);
            write_density_csv(d, (fs::path(out_dir) / (d.id + ".csv")).string());
            write_manifest(out_dir, "solve",
                           "measure = " + measure + "\ngrid = " + std::to_string(grid) + "\n");
            std::cout << "wrote " << (fs::path(out_dir) / (d.id + ".csv")).string()
                      << " (norm constant " << fmt_double(d.norm_constant) << ")\n";
        } else if (*c_sample) {
            const TabulatedDensity d = make_measure(measure, static_cast<int>(grid));
            SampleSet s = d.is_1d() ? sample_inverse_cdf(d, n_points, seed)
                                    : sample_rejection_disk(d, n_points, seed, 2.0 / EIGEN_PI);
            fs::create_directories(out_dir);
            write_samples_csv(s, (fs::path(out_dir) / "samples.csv").string());
            write_manifest(out_dir, "sample",
                           "measure = " + measure + "\nn = " + std::to_string(n_points) +
                               "\nseed = " + std::to_string(seed) + "\n");
            std::cout << "wrote " << n_points << " samples to "
                      << (fs::path(out_dir) / "samples.csv").string() << "\n";
        } else if (*c_train) {
            ExperimentConfig ec;
            if (!config_path.empty()) ec = load_experiment(config_path, seed, out_dir, 0, "");
            ec.example = example;
            ec.master_seed = seed;
            const TabulatedDensity target = (example == "2d") ? closed_form_2d() : closed_form_1d();
            SweepRun run = sweep_single_run(ec, target, n_points, 0);
            fs::create_directories(out_dir);
            write_run_csv(run, (fs::path(out_dir) / "train.csv").string());
            write_manifest(out_dir, "train", ec.echo());
            std::cout << "val_w2 = " << fmt_double(run.val_w2) << " after " << run.iters_run
                      << " iters (best loss " << fmt_double(run.best_loss) << ")\n";
        } else if (*c_sweep) {
            // flags override the config only when explicitly supplied
            ExperimentConfig ec = load_experiment(
                config_path, c_sweep->count("--seed") ? seed : 0,
                c_sweep->count("--out") ? out_dir : "", workers, method);
            const RateFit fit = rate_sweep(ec, ec.out_dir);
            write_manifest(ec.out_dir, "sweep", ec.echo());
            std::cout << "slope = " << fmt_double(fit.slope)
                      << ", intercept = " << fmt_double(fit.intercept)
                      << ", residual_rms = " << fmt_double(fit.residual_rms) << "\n";
        } else if (*c_pd) {
            const TabulatedDensity d = make_measure(measure, static_cast<int>(grid));
            const DoublingProbeResult r = doubling_probe(d, static_cast<int>(trials), seed);
            fs::create_directories(out_dir);
            std::ofstream out((fs::path(out_dir) / "doubling.csv").string());
            out << "measure,trials,max_ratio\n"
                << measure << ',' << r.trials << ',' << fmt_double(r.max_ratio) << '\n';
            write_manifest(out_dir, "probe-doubling",
                           "measure = " + measure + "\ntrials = " + std::to_string(trials) +
                               "\nseed = " + std::to_string(seed) + "\n");
            std::cout << "max doubling ratio = " << fmt_double(r.max_ratio) << " over " << r.trials
                      << " trials\n";
        } else if (*c_ph) {
            auto map = [](const Eigen::VectorXd& x) {
                return Eigen::VectorXd::Constant(1, exact_map_1d(x[0]));
            };
            const HolderEstimate h = holder_probe(map, DomainSpec::interval(0.0, 1.0),
                                                  static_cast<int>(n_points), seed);
            fs::create_directories(out_dir);
            std::ofstream out((fs::path(out_dir) / "holder.csv").string());
            out << "beta,constant,slope_raw,pairs,r_max\n"
                << fmt_double(h.beta) << ',' << fmt_double(h.constant) << ','
                << fmt_double(h.slope_raw) << ',' << h.pairs << ',' << fmt_double(h.r_max) << '\n';
            write_manifest(out_dir, "probe-holder",
                           "n = " + std::to_string(n_points) + "\nseed = " + std::to_string(seed) +
                               "\n");
            std::cout << "beta = " << fmt_double(h.beta) << ", constant = " << fmt_double(h.constant)
                      << "\n";
        } else if (*c_ood) {
            const TabulatedDensity nu = closed_form_1d();
            const TabulatedDensity nu1 = make_measure("elliptic", 2001);
            SampleSet xs = sample_uniform_interval(0.0, 1.0, n_points, seed);
            SampleSet ys = sample_inverse_cdf(nu, n_points, seed + 1);
            TransportNet net = init_net({1, 256, 256, 1}, seed + 2);
            TrainConfig tc;
            tc.max_iters = 4000;
            tc.patience = 2000;
            tc.seed = seed + 3;
            auto [best, hist] = train(xs, ys, std::move(net), tc);
            SampleSet mu_v = sample_uniform_interval(0.0, 1.0, 4096, seed + 4);
            SampleSet nu_v = sample_inverse_cdf(nu, 4096, seed + 5);
            SampleSet nu1_v = sample_inverse_cdf(nu1, 4096, seed + 6);
            const OodResult r = ood_check(best, mu_v, nu_v, nu1_v);
            fs::create_directories(out_dir);
            std::ofstream out((fs::path(out_dir) / "ood.csv").string());
            out << "lhs,rhs,slack,risk_nu,shift_w2,tolerance\n"
                << fmt_double(r.lhs) << ',' << fmt_double(r.rhs) << ',' << fmt_double(r.slack)
                << ',' << fmt_double(r.risk_nu) << ',' << fmt_double(r.shift_w2) << ','
                << fmt_double(r.tolerance) << '\n';
            write_manifest(out_dir, "ood",
                           "n = " + std::to_string(n_points) + "\nseed = " + std::to_string(seed) +
                               "\n");
            std::cout << "lhs = " << fmt_double(r.lhs) << " <= rhs = " << fmt_double(r.rhs)
                      << " (slack " << fmt_double(r.slack) << ")\n";
        } else if (*c_report) {
            // collect every sweep.csv under --dir, one rate table row per N
            std::vector<fs::path> sweeps;
            if (fs::exists(report_dir))
                for (const auto& entry : fs::recursive_directory_iterator(report_dir))
                    if (entry.is_regular_file() && entry.path().filename() == "sweep.csv")
                        sweeps.push_back(entry.path());
            if (sweeps.empty()) {
                std::cerr << "no sweep artifacts found under " << report_dir << "\n";
                return 1;
            }
            fs::create_directories(out_dir);
            std::sort(sweeps.begin(), sweeps.end());
            for (const fs::path& p : sweeps) {
                std::map<long, std::pair<double, int>> acc;
                for (const auto& row : read_csv(p.string())) {
                    if (row.size() != 3 || row[0] == "N") continue;
                    auto& [sum, cnt] = acc[std::stol(row[0])];
                    sum += std::stod(row[2]);
                    ++cnt;
                }
                if (acc.size() < 2) continue;
                RateFit fit;
                for (const auto& [n, sc] : acc) {
                    fit.n_values.push_back(static_cast<double>(n));
                    fit.mean_w2.push_back(sc.first / sc.second);
                }
                fit_loglog(fit);
                const std::string tag = p.parent_path().filename().string();
                std::ofstream out((fs::path(out_dir) / ("rate_" + tag + ".csv")).string());
                out << "N,mean_w2\n";
                for (std::size_t i = 0; i < fit.n_values.size(); ++i)
                    out << static_cast<long>(fit.n_values[i]) << ','
                        << fmt_double(fit.mean_w2[i]) << '\n';
                out << "# slope=" << fmt_double(fit.slope)
                    << ",intercept=" << fmt_double(fit.intercept) << '\n';
                write_loglog_svg((fs::path(out_dir) / ("rate_" + tag + ".svg")).string(),
                                 fit.n_values, fit.mean_w2, fit.slope, fit.intercept,
                                 "validation W2 vs sample size (" + tag + ")");
                std::cout << tag << ": slope = " << fmt_double(fit.slope)
                          << ", intercept = " << fmt_double(fit.intercept) << "\n";
            }
            write_manifest(out_dir, "report", "dir = " + report_dir + "\n");
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n"
                  << "manifest: " << (fs::path(out_dir) / "manifest.txt").string() << "\n";
        return 2;
    }
    return 0;
}
