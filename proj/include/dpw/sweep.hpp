#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dpw/config.hpp"
#include "dpw/csv.hpp"
#include "dpw/measures.hpp"
#include "dpw/risk.hpp"
#include "dpw/svg.hpp"
#include "dpw/trainer.hpp"

namespace dpw {

struct SweepRun {
    long n = 0;
    int repeat = 0;
    double val_w2 = 0.0;
    double best_loss = 0.0;
    long iters_run = 0;
    bool diverged = false;
    double seconds = 0.0;
};

namespace detail {

inline std::uint64_t run_seed(const ExperimentConfig& cfg, long n, int repeat, std::uint64_t tag) {
    return RngStream::derive(cfg.master_seed,
                             {cfg.example == "2d" ? 2ULL : 1ULL, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(repeat), tag})
        .next_u64();
}

}  // namespace detail

// Train and validate one (N, repeat) cell of the sweep.
inline SweepRun sweep_single_run(const ExperimentConfig& cfg, const TabulatedDensity& target,
                                 long n, int repeat) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool is_2d = (cfg.example == "2d");

    SampleSet xs, ys;
    if (is_2d) {
        xs = sample_uniform_disk(n, detail::run_seed(cfg, n, repeat, 1));
        ys = sample_rejection_disk(target, n, detail::run_seed(cfg, n, repeat, 2), 2.0 / EIGEN_PI);
    } else {
        xs = sample_uniform_interval(0.0, 1.0, n, detail::run_seed(cfg, n, repeat, 1));
        ys = sample_inverse_cdf(target, n, detail::run_seed(cfg, n, repeat, 2));
    }

    TransportNet net = init_net(cfg.effective_arch(), detail::run_seed(cfg, n, repeat, 3));
    TrainConfig tc = cfg.train;
    tc.seed = detail::run_seed(cfg, n, repeat, 4);
    auto [best, hist] = train(xs, ys, std::move(net), tc);

    SampleSet val_xs, val_ys;
    if (is_2d) {
        val_xs = sample_uniform_disk(cfg.validation_size, detail::run_seed(cfg, n, repeat, 5));
        val_ys = sample_rejection_disk(target, cfg.validation_size,
                                       detail::run_seed(cfg, n, repeat, 6), 2.0 / EIGEN_PI);
    } else {
        val_xs = sample_uniform_interval(0.0, 1.0, cfg.validation_size,
                                         detail::run_seed(cfg, n, repeat, 5));
        val_ys = sample_inverse_cdf(target, cfg.validation_size, detail::run_seed(cfg, n, repeat, 6));
    }
    const W2Result v = validate(best, val_xs, val_ys,
                                cfg.validation_options(detail::run_seed(cfg, n, repeat, 7)));

    SweepRun r;
    r.n = n;
    r.repeat = repeat;
    r.val_w2 = v.value;
    r.best_loss = hist.best_loss;
    r.iters_run = hist.iters_run;
    r.diverged = hist.diverged;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline void write_run_csv(const SweepRun& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_run_csv: cannot open " + path);
    out << "N,repeat,val_w2,best_loss,iters_run,diverged\n"
        << r.n << ',' << r.repeat << ',' << fmt_double(r.val_w2) << ',' << fmt_double(r.best_loss)
        << ',' << r.iters_run << ',' << (r.diverged ? 1 : 0) << '\n';
}

// Full sweep: schedules (N, repeat) cells across a worker pool, writes one CSV
// per run plus aggregated sweep.csv / rate_fit.csv / SVG, and returns the fit.
inline RateFit rate_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                          bool write_artifacts = true) {
    namespace fs = std::filesystem;
    if (write_artifacts) fs::create_directories(fs::path(out_dir) / "runs");

    const TabulatedDensity target = (cfg.example == "2d") ? closed_form_2d() : closed_form_1d();
    const std::size_t total = cfg.n_list.size() * static_cast<std::size_t>(cfg.repeats);
    std::vector<SweepRun> runs(total);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            const long n = cfg.n_list[i / cfg.repeats];
            const int rep = static_cast<int>(i % cfg.repeats);
            runs[i] = sweep_single_run(cfg, target, n, rep);
        }
    };
    if (cfg.workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RateFit fit;
    fit.repeats = cfg.repeats;
    for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
        double sum = 0.0, sum_sq = 0.0;
        int cnt = 0;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            const SweepRun& r = runs[k * cfg.repeats + rep];
            if (r.diverged) {
                ++fit.excluded_runs;
                continue;
            }
            sum += r.val_w2;
            sum_sq += r.val_w2 * r.val_w2;
            ++cnt;
        }
        if (cnt == 0) continue;
        const double mean = sum / cnt;
        fit.n_values.push_back(static_cast<double>(cfg.n_list[k]));
        fit.mean_w2.push_back(mean);
        fit.stderr_w2.push_back(
            cnt > 1 ? std::sqrt(std::max(0.0, (sum_sq - cnt * mean * mean) / (cnt - 1)) / cnt)
                    : 0.0);
    }
    fit_loglog(fit);

    if (write_artifacts) {
        for (const SweepRun& r : runs) {
            std::ostringstream name;
            name << "run_N" << r.n << "_r" << r.repeat << ".csv";
            write_run_csv(r, (fs::path(out_dir) / "runs" / name.str()).string());
        }
        std::ofstream sw((fs::path(out_dir) / "sweep.csv").string());
        sw << "N,repeat,val_w2\n";
        for (const SweepRun& r : runs)
            sw << r.n << ',' << r.repeat << ',' << fmt_double(r.val_w2) << '\n';

        std::ofstream rf((fs::path(out_dir) / "rate_fit.csv").string());
        rf << "N,mean_w2,stderr_w2\n";
        for (std::size_t i = 0; i < fit.n_values.size(); ++i)
            rf << static_cast<long>(fit.n_values[i]) << ',' << fmt_double(fit.mean_w2[i]) << ','
               << fmt_double(fit.stderr_w2[i]) << '\n';
        rf << "# slope=" << fmt_double(fit.slope) << ",intercept=" << fmt_double(fit.intercept)
           << ",residual_rms=" << fmt_double(fit.residual_rms)
           << ",excluded_runs=" << fit.excluded_runs << '\n';

        write_loglog_svg((fs::path(out_dir) / "rate_fit.svg").string(), fit.n_values, fit.mean_w2,
                         fit.slope, fit.intercept,
                         "validation W2 vs sample size (" + cfg.example + ")");

        // manifest carries the config echo; timestamps live here only
        std::ofstream mf((fs::path(out_dir) / "manifest.txt").string());
        mf << "# sweep manifest\n" << cfg.echo();
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        mf << "\nwall_clock_unix = "
           << std::chrono::duration_cast<std::chrono::seconds>(now).count() << "\n";
        double total_secs = 0.0;
        for (const SweepRun& r : runs) total_secs += r.seconds;
        mf << "total_run_seconds = " << total_secs << "\n";
    }
    return fit;
}

}  // namespace dpw
