#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dpw/domain.hpp"
#include "dpw/neural.hpp"
#include "dpw/transport.hpp"

namespace dpw {

struct TrainConfig {
    long max_iters = 100000;
    Eigen::Index batch = 0;  // 0 = floor(N/2)
    double lr = 1e-2;
    long steplr_step_size = 500;
    double steplr_decay = 0.9;
    long patience = 5000;
    long assignment_refresh_every = 1;  // batch + coupling are refreshed together
    bool global_assignment = false;     // re-solve on the full clouds instead of per batch
    std::uint64_t seed = 0;
    double divergence_guard = 1e6;

    Eigen::Index effective_batch(Eigen::Index n) const {
        Eigen::Index b = (batch == 0) ? n / 2 : batch;
        return std::max<Eigen::Index>(1, std::min(b, n));
    }
};

struct TrainHistory {
    std::vector<double> loss;  // per-iteration sigma-fixed batch loss
    std::vector<double> lr;
    std::vector<char> is_best;
    double best_loss = std::numeric_limits<double>::infinity();
    long best_iter = -1;
    long iters_run = 0;
    bool diverged = false;
    double train_seconds = 0.0, assign_seconds = 0.0;
    // the batch the best loss was recorded on, for checkpoint verification
    Eigen::MatrixXd best_batch_x, best_batch_y;  // column layout d x B
};

namespace detail {

// Optimal within-batch coupling between current outputs and targets. 1D
// squared cost is minimized by rank pairing, so sorting replaces the LP there.
inline std::vector<Eigen::Index> batch_assignment(const Eigen::MatrixXd& outputs,
                                                  const Eigen::MatrixXd& targets) {
    const Eigen::Index b = outputs.cols();
    std::vector<Eigen::Index> sigma(static_cast<std::size_t>(b));
    if (outputs.rows() == 1) {
        std::vector<Eigen::Index> ox(static_cast<std::size_t>(b)), oy(static_cast<std::size_t>(b));
        std::iota(ox.begin(), ox.end(), 0);
        std::iota(oy.begin(), oy.end(), 0);
        std::sort(ox.begin(), ox.end(),
                  [&](Eigen::Index p, Eigen::Index q) { return outputs(0, p) < outputs(0, q); });
        std::sort(oy.begin(), oy.end(),
                  [&](Eigen::Index p, Eigen::Index q) { return targets(0, p) < targets(0, q); });
        for (Eigen::Index k = 0; k < b; ++k)
            sigma[static_cast<std::size_t>(ox[static_cast<std::size_t>(k)])] =
                oy[static_cast<std::size_t>(k)];
        return sigma;
    }
    Eigen::MatrixXd cost(b, b);
    for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index j = 0; j < b; ++j)
            cost(i, j) = (outputs.col(i) - targets.col(j)).squaredNorm();
    return assignment_exact(cost).sigma;
}

}  // namespace detail

// One-step Wasserstein-guided training: alternate an optimal-assignment
// refresh with Adam steps on the assignment-fixed quadratic loss. Returns the
// best-loss checkpoint.
inline std::pair<TransportNet, TrainHistory> train(const SampleSet& xs, const SampleSet& ys,
                                                   TransportNet net, const TrainConfig& cfg) {
    const Eigen::Index n = xs.size();
    if (ys.size() != n) throw std::invalid_argument("train: xs and ys must have equal size");
    if (cfg.patience > cfg.max_iters) throw std::invalid_argument("train: patience > max_iters");
    const Eigen::Index b = cfg.effective_batch(n);
    const long refresh = std::max<long>(1, cfg.assignment_refresh_every);

    // column layouts for GEMM-friendly batching
    const Eigen::MatrixXd x_all = xs.points.transpose();
    const Eigen::MatrixXd y_all = ys.points.transpose();

    RngStream rng = RngStream::derive(cfg.seed, {0x7261696eULL});
    OptimState opt = OptimState::for_net(net, cfg.lr, cfg.steplr_step_size, cfg.steplr_decay);
    TrainHistory hist;
    hist.loss.reserve(static_cast<std::size_t>(std::min<long>(cfg.max_iters, 1 << 20)));
    TransportNet best = net;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Eigen::Index cursor = 0;

    // global coupling (optional): sigma over all indices
    std::vector<Eigen::Index> global_sigma;

    Eigen::MatrixXd xb(x_all.rows(), b), yb(y_all.rows(), b);
    NetGrad grad;
    const auto t0 = std::chrono::steady_clock::now();
    double assign_secs = 0.0;

    for (long iter = 0; iter < cfg.max_iters; ++iter) {
        if (iter % refresh == 0) {
            // next batch of matched indices, reshuffling per epoch-equivalent
            if (cursor + b > n) {
                rng.shuffle(order);
                cursor = 0;
            }
            for (Eigen::Index k = 0; k < b; ++k)
                xb.col(k) = x_all.col(order[static_cast<std::size_t>(cursor + k)]);

            const auto ta = std::chrono::steady_clock::now();
            if (cfg.global_assignment) {
                const Eigen::MatrixXd out_all = forward_batch(net, x_all);
                global_sigma = detail::batch_assignment(out_all, y_all);
                for (Eigen::Index k = 0; k < b; ++k)
                    yb.col(k) = y_all.col(
                        global_sigma[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor + k)])]);
            } else {
                for (Eigen::Index k = 0; k < b; ++k)
                    yb.col(k) = y_all.col(order[static_cast<std::size_t>(cursor + k)]);
                const Eigen::MatrixXd out = forward_batch(net, xb);
                const std::vector<Eigen::Index> sigma = detail::batch_assignment(out, yb);
                Eigen::MatrixXd yb_matched(yb.rows(), b);
                for (Eigen::Index k = 0; k < b; ++k)
                    yb_matched.col(k) = yb.col(sigma[static_cast<std::size_t>(k)]);
                yb = yb_matched;
            }
            assign_secs += std::chrono::duration<double>(std::chrono::steady_clock::now() - ta).count();
            cursor += b;
        }

        double loss;
        try {
            loss = loss_and_grad(net, xb, yb, grad);
        } catch (const std::runtime_error&) {
            hist.diverged = true;
            break;
        }
        if (!std::isfinite(loss) || loss > cfg.divergence_guard) {
            hist.diverged = true;
            break;
        }
        hist.loss.push_back(loss);
        hist.lr.push_back(opt.current_lr());
        const bool improved = loss < hist.best_loss;
        hist.is_best.push_back(improved ? 1 : 0);
        if (improved) {
            hist.best_loss = loss;
            hist.best_iter = iter;
            best = net;
            hist.best_batch_x = xb;
            hist.best_batch_y = yb;
        }
        adam_step(net, grad, opt);
        hist.iters_run = iter + 1;
        if (iter - hist.best_iter >= cfg.patience) break;
    }

    hist.assign_seconds = assign_secs;
    hist.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() - assign_secs;
    return {std::move(best), std::move(hist)};
}

// Push the validation source through the net and measure W2 against an
// independent validation target sample.
inline W2Result validate(const TransportNet& net, const SampleSet& val_xs, const SampleSet& val_ys,
                         const W2Options& opt = {}) {
    SampleSet pushed;
    pushed.points = forward_batch(net, Eigen::MatrixXd(val_xs.points.transpose())).transpose();
    pushed.measure_id = val_xs.measure_id + ":pushforward";
    pushed.seed = val_xs.seed;
    if (pushed.dim() == 1 && opt.method == W2Options::Method::ExactLp)
        return w2_1d(pushed, val_ys);
    return w2_point_clouds(pushed, val_ys, opt);
}

}  // namespace dpw
