#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpw/rng.hpp"

namespace dpw {

// Feedforward ReLU network representing a pushforward map: affine layers with
// ReLU on all hidden layers and identity output.
template <class Scalar>
struct TransportNetT {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    std::vector<int> layer_dims;
    std::vector<Mat> weights;  // weights[l]: dims[l+1] x dims[l]
    std::vector<Vec> biases;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t n_layers() const { return weights.size(); }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += weights[l].size() + biases[l].size();
        return n;
    }
};

using TransportNet = TransportNetT<double>;

template <class Scalar>
struct NetGradT {
    std::vector<typename TransportNetT<Scalar>::Mat> d_weights;
    std::vector<typename TransportNetT<Scalar>::Vec> d_biases;
};

using NetGrad = NetGradT<double>;

// He initialization: weights ~ Normal(0, 2/fan_in), biases zero.
template <class Scalar = double>
TransportNetT<Scalar> init_net(const std::vector<int>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("init_net: at least 2 layers required");
    TransportNetT<Scalar> net;
    net.layer_dims = layer_dims;
    RngStream rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
        const Scalar sd = std::sqrt(Scalar(2) / Scalar(fan_in));
        typename TransportNetT<Scalar>::Mat w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) w(i, j) = sd * static_cast<Scalar>(rng.normal());
        net.weights.push_back(std::move(w));
        net.biases.push_back(TransportNetT<Scalar>::Vec::Zero(fan_out));
    }
    return net;
}

// Batched forward pass: columns of x are input points (d_in x B).
template <class Scalar>
typename TransportNetT<Scalar>::Mat forward_batch(const TransportNetT<Scalar>& net,
                                                  const typename TransportNetT<Scalar>::Mat& x) {
    typename TransportNetT<Scalar>::Mat a = x;
    const std::size_t L = net.n_layers();
    for (std::size_t l = 0; l < L; ++l) {
        a = (net.weights[l] * a).colwise() + net.biases[l];
        if (l + 1 < L) a = a.cwiseMax(Scalar(0));
        if (!a.allFinite()) throw std::runtime_error("forward: non-finite intermediate value");
    }
    return a;
}

template <class Scalar>
typename TransportNetT<Scalar>::Vec forward(const TransportNetT<Scalar>& net,
                                            const typename TransportNetT<Scalar>::Vec& x) {
    typename TransportNetT<Scalar>::Mat xm = x;
    return forward_batch(net, xm).col(0);
}

// Mean squared pushforward loss (1/B) sum_i |T(x_i) - y_i|^2 against
// pre-matched targets, with exact reverse-mode gradients. The ReLU subgradient
// at 0 is taken as 0. xs, ys: d x B column layout.
template <class Scalar>
Scalar loss_and_grad(const TransportNetT<Scalar>& net,
                     const typename TransportNetT<Scalar>::Mat& xs,
                     const typename TransportNetT<Scalar>::Mat& ys, NetGradT<Scalar>& grad) {
    using Mat = typename TransportNetT<Scalar>::Mat;
    if (xs.cols() != ys.cols()) throw std::invalid_argument("loss_and_grad: batch size mismatch");
    if (xs.rows() != net.input_dim() || ys.rows() != net.output_dim())
        throw std::invalid_argument("loss_and_grad: shape mismatch");
    const std::size_t L = net.n_layers();
    const Eigen::Index B = xs.cols();

    std::vector<Mat> acts(L + 1);  // acts[0] = input, acts[l] = post-activation of layer l
    std::vector<Mat> pre(L);       // pre-activation
    acts[0] = xs;
    for (std::size_t l = 0; l < L; ++l) {
        pre[l] = (net.weights[l] * acts[l]).colwise() + net.biases[l];
        acts[l + 1] = (l + 1 < L) ? pre[l].cwiseMax(Scalar(0)) : pre[l];
    }
    const Mat resid = acts[L] - ys;
    const Scalar loss = resid.squaredNorm() / static_cast<Scalar>(B);

    grad.d_weights.resize(L);
    grad.d_biases.resize(L);
    Mat delta = (Scalar(2) / static_cast<Scalar>(B)) * resid;
    for (std::size_t l = L; l-- > 0;) {
        grad.d_weights[l] = delta * acts[l].transpose();
        grad.d_biases[l] = delta.rowwise().sum();
        if (l > 0)
            delta = (net.weights[l].transpose() * delta).array() *
                    (pre[l - 1].array() > Scalar(0)).template cast<Scalar>();
    }
    return loss;
}

// Adam with a StepLR-scheduled learning rate.
template <class Scalar>
struct OptimStateT {
    using Mat = typename TransportNetT<Scalar>::Mat;
    using Vec = typename TransportNetT<Scalar>::Vec;

    std::vector<Mat> m_w, v_w;
    std::vector<Vec> m_b, v_b;
    long step = 0;
    Scalar base_lr = Scalar(1e-2);
    long steplr_step_size = 500;
    Scalar steplr_decay = Scalar(0.9);
    Scalar beta1 = Scalar(0.9), beta2 = Scalar(0.999), eps = Scalar(1e-8);

    static OptimStateT for_net(const TransportNetT<Scalar>& net, Scalar lr = Scalar(1e-2),
                               long step_size = 500, Scalar decay = Scalar(0.9)) {
        OptimStateT s;
        s.base_lr = lr;
        s.steplr_step_size = step_size;
        s.steplr_decay = decay;
        for (std::size_t l = 0; l < net.n_layers(); ++l) {
            s.m_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
            s.v_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
            s.m_b.push_back(Vec::Zero(net.biases[l].size()));
            s.v_b.push_back(Vec::Zero(net.biases[l].size()));
        }
        return s;
    }

    Scalar current_lr() const {
        return base_lr * std::pow(steplr_decay, static_cast<Scalar>(step / steplr_step_size));
    }
};

using OptimState = OptimStateT<double>;

template <class Scalar>
void adam_step(TransportNetT<Scalar>& net, const NetGradT<Scalar>& grad, OptimStateT<Scalar>& opt) {
    const Scalar lr = opt.current_lr();
    const long t = opt.step + 1;
    const Scalar bc1 = Scalar(1) - std::pow(opt.beta1, static_cast<Scalar>(t));
    const Scalar bc2 = Scalar(1) - std::pow(opt.beta2, static_cast<Scalar>(t));
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
            m = opt.beta1 * m + (Scalar(1) - opt.beta1) * g;
            v = opt.beta2 * v + (Scalar(1) - opt.beta2) * g.cwiseProduct(g);
            p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.eps);
        };
        update(net.weights[l], opt.m_w[l], opt.v_w[l], grad.d_weights[l]);
        update(net.biases[l], opt.m_b[l], opt.v_b[l], grad.d_biases[l]);
    }
    ++opt.step;
}

// Certified Lipschitz upper bound: product of layer spectral norms. Power
// iteration with a fixed start vector, 200 iterations or 1e-10 relative
// stagnation.
template <class Scalar>
Scalar lipschitz_upper_bound(const TransportNetT<Scalar>& net) {
    Scalar prod = Scalar(1);
    for (const auto& w : net.weights) {
        typename TransportNetT<Scalar>::Vec v =
            TransportNetT<Scalar>::Vec::Ones(w.cols()).normalized();
        Scalar sigma = Scalar(0), sigma_prev = Scalar(-1);
        for (int it = 0; it < 200; ++it) {
            typename TransportNetT<Scalar>::Vec u = w * v;
            sigma = u.norm();
            if (sigma == Scalar(0)) break;
            v = w.transpose() * u;
            const Scalar nv = v.norm();
            if (nv == Scalar(0)) break;
            v /= nv;
            if (std::abs(sigma - sigma_prev) <= Scalar(1e-10) * std::max(sigma, Scalar(1))) break;
            sigma_prev = sigma;
        }
        prod *= sigma;
    }
    return prod;
}

// Width/depth budget for approximating an alpha-Holder map on [-B,B]^d:
// bound = 19 sqrt(d) lambda (2B)^alpha W^{-2a/d} L^{-2a/d}, realized by a ReLU
// network of width 3^{d+3} max{d floor(W^{1/d}), W+1} and depth 12L + 14 + 2d.
struct ApproxBudget {
    int width = 1, depth = 1;
    double alpha = 1.0, holder_const = 1.0, box_half_width = 1.0;
    int dim = 1;
    double bound = 0.0;
    long prescribed_width = 0;
    long prescribed_depth = 0;
};

inline ApproxBudget approx_budget(int W, int L, double alpha, double lambda_h, double B, int d) {
    if (W < 1 || L < 1 || alpha <= 0.0 || lambda_h <= 0.0 || B <= 0.0 || d < 1)
        throw std::invalid_argument("approx_budget: all arguments must be positive");
    ApproxBudget a;
    a.width = W;
    a.depth = L;
    a.alpha = alpha;
    a.holder_const = lambda_h;
    a.box_half_width = B;
    a.dim = d;
    a.bound = 19.0 * std::sqrt(static_cast<double>(d)) * lambda_h * std::pow(2.0 * B, alpha) *
              std::pow(static_cast<double>(W), -2.0 * alpha / d) *
              std::pow(static_cast<double>(L), -2.0 * alpha / d);
    const long wroot = static_cast<long>(std::floor(std::pow(static_cast<double>(W), 1.0 / d)));
    a.prescribed_width = static_cast<long>(std::pow(3.0, d + 3)) *
                         std::max<long>(static_cast<long>(d) * wroot, static_cast<long>(W) + 1);
    a.prescribed_depth = 12 * static_cast<long>(L) + 14 + 2 * d;
    return a;
}

// Lossless flat-CSV checkpoint with a header recording architecture, seed and
// step count.
template <class Scalar>
void save_net(const TransportNetT<Scalar>& net, const std::string& path, std::uint64_t seed = 0,
              long step = 0) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_net: cannot open " + path);
    out << "# dpw-checkpoint v1\n# layer_dims=";
    for (std::size_t i = 0; i < net.layer_dims.size(); ++i)
        out << (i ? "," : "") << net.layer_dims[i];
    out << "\n# seed=" << seed << "\n# step=" << step << "\n";
    out.precision(17);
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j)
                out << net.weights[l](i, j) << "\n";
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) out << net.biases[l][i] << "\n";
    }
}

template <class Scalar = double>
TransportNetT<Scalar> load_net(const std::string& path, std::uint64_t* seed_out = nullptr,
                               long* step_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_net: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("# dpw-checkpoint", 0) != 0)
        throw std::runtime_error("load_net: not a checkpoint file");
    std::getline(in, line);
    std::vector<int> dims;
    {
        const auto pos = line.find('=');
        std::stringstream ss(line.substr(pos + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
    }
    std::getline(in, line);
    if (seed_out) *seed_out = std::stoull(line.substr(line.find('=') + 1));
    std::getline(in, line);
    if (step_out) *step_out = std::stol(line.substr(line.find('=') + 1));

    TransportNetT<Scalar> net;
    net.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        typename TransportNetT<Scalar>::Mat w(dims[l + 1], dims[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                std::getline(in, line);
                w(i, j) = static_cast<Scalar>(std::stod(line));
            }
        typename TransportNetT<Scalar>::Vec b(dims[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            std::getline(in, line);
            b[i] = static_cast<Scalar>(std::stod(line));
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

}  // namespace dpw
