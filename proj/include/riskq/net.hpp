#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskq/rng.hpp"

namespace riskq {

/// Fully connected ReLU network: affine layers with ReLU on every hidden
/// layer and identity on the output. Weights are row-major, weights[l] has
/// shape dims[l+1] x dims[l]. Double precision throughout.
struct Mlp {
    std::vector<int> dims;                    // e.g. {input, h1, h2, output}
    std::vector<std::vector<double>> weights; // [layer][out*dims[l] + in]
    std::vector<std::vector<double>> biases;  // [layer][out]

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    int n_layers() const { return static_cast<int>(dims.size()) - 1; }

    /// Glorot-uniform initialization: weights uniform in
    /// +/- sqrt(6/(fan_in+fan_out)) per layer, biases zero. Consumes the
    /// stream layer by layer in row-major order, so a seed pins the net.
    static Mlp glorot(std::vector<int> layer_dims, RngStream& rng) {
        if (layer_dims.size() < 2)
            throw std::invalid_argument("Mlp: need at least input and output dims");
        for (int d : layer_dims)
            if (d < 1) throw std::invalid_argument("Mlp: layer dims must be positive");
        Mlp net;
        net.dims = std::move(layer_dims);
        const int L = net.n_layers();
        net.weights.resize(static_cast<size_t>(L));
        net.biases.resize(static_cast<size_t>(L));
        for (int l = 0; l < L; ++l) {
            const int fan_in = net.dims[static_cast<size_t>(l)];
            const int fan_out = net.dims[static_cast<size_t>(l) + 1];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            net.weights[static_cast<size_t>(l)].resize(static_cast<size_t>(fan_in) *
                                                       static_cast<size_t>(fan_out));
            for (auto& w : net.weights[static_cast<size_t>(l)])
                w = (2.0 * rng.uniform() - 1.0) * bound;
            net.biases[static_cast<size_t>(l)].assign(static_cast<size_t>(fan_out), 0.0);
        }
        return net;
    }

    /// All-zero network of the given architecture.
    static Mlp zeros(std::vector<int> layer_dims) {
        RngStream rng(0);
        Mlp net = glorot(std::move(layer_dims), rng);
        for (auto& layer : net.weights)
            for (auto& w : layer) w = 0.0;
        return net;
    }
};

/// Reusable per-layer activation/delta buffers so the training loop does not
/// allocate per sample.
struct MlpWorkspace {
    std::vector<std::vector<double>> act;   // act[0] = input, act[L] = output
    std::vector<std::vector<double>> delta; // delta[l] = dLoss/d act[l]

    void fit(const Mlp& net) {
        act.resize(net.dims.size());
        delta.resize(net.dims.size());
        for (size_t i = 0; i < net.dims.size(); ++i) {
            act[i].assign(static_cast<size_t>(net.dims[i]), 0.0);
            delta[i].assign(static_cast<size_t>(net.dims[i]), 0.0);
        }
    }
};

namespace detail {
/// Forward pass recording every post-activation in ws.act.
inline void forward_into(const Mlp& net, const std::vector<double>& input, MlpWorkspace& ws) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw std::invalid_argument("Mlp forward: input length mismatch");
    ws.act[0] = input;
    const int L = net.n_layers();
    for (int l = 0; l < L; ++l) {
        const auto& w = net.weights[static_cast<size_t>(l)];
        const auto& b = net.biases[static_cast<size_t>(l)];
        const auto& x = ws.act[static_cast<size_t>(l)];
        auto& y = ws.act[static_cast<size_t>(l) + 1];
        const int n_in = net.dims[static_cast<size_t>(l)];
        const int n_out = net.dims[static_cast<size_t>(l) + 1];
        const bool hidden = l + 1 < L;
        for (int o = 0; o < n_out; ++o) {
            double acc = b[static_cast<size_t>(o)];
            const double* row = &w[static_cast<size_t>(o) * static_cast<size_t>(n_in)];
            for (int i = 0; i < n_in; ++i) acc += row[i] * x[static_cast<size_t>(i)];
            y[static_cast<size_t>(o)] = hidden ? std::max(acc, 0.0) : acc;
        }
    }
}
} // namespace detail

inline std::vector<double> forward(const Mlp& net, const std::vector<double>& input) {
    MlpWorkspace ws;
    ws.fit(net);
    detail::forward_into(net, input, ws);
    return ws.act.back();
}

/// Gradient accumulator shaped like an Mlp's parameters.
struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void fit(const Mlp& net) {
        weights.resize(net.weights.size());
        biases.resize(net.biases.size());
        for (size_t l = 0; l < net.weights.size(); ++l) {
            weights[l].assign(net.weights[l].size(), 0.0);
            biases[l].assign(net.biases[l].size(), 0.0);
        }
    }

    void zero() {
        for (auto& layer : weights) std::fill(layer.begin(), layer.end(), 0.0);
        for (auto& layer : biases) std::fill(layer.begin(), layer.end(), 0.0);
    }
};

/// One minibatch for the masked regression loss
///   L = (1/M) * sum_j (targets[j] - out(inputs[j])[heads[j]])^2,
/// i.e. each sample supervises exactly one output head and all other heads
/// receive zero gradient from it.
struct MaskedBatch {
    std::vector<std::vector<double>> inputs;
    std::vector<int> heads;
    std::vector<double> targets;

    size_t size() const { return inputs.size(); }
    void clear() {
        inputs.clear();
        heads.clear();
        targets.clear();
    }
};

/// Exact gradients of the masked MSE; overwrites `grads` and returns the
/// batch loss. ReLU subgradient at exactly 0 is taken as 0.
inline double backward(const Mlp& net, const MaskedBatch& batch, MlpGrads& grads,
                       MlpWorkspace& ws) {
    if (batch.size() == 0) throw std::invalid_argument("backward: empty batch");
    if (batch.heads.size() != batch.size() || batch.targets.size() != batch.size())
        throw std::invalid_argument("backward: batch field sizes differ");
    grads.fit(net);
    ws.fit(net);
    const int L = net.n_layers();
    const double inv_m = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (size_t j = 0; j < batch.size(); ++j) {
        const int head = batch.heads[j];
        if (head < 0 || head >= net.output_dim())
            throw std::invalid_argument("backward: head index out of range");
        detail::forward_into(net, batch.inputs[j], ws);
        const double out = ws.act.back()[static_cast<size_t>(head)];
        const double residual = out - batch.targets[j];
        loss += residual * residual * inv_m;

        // Output layer: the loss touches a single row, so seed the previous
        // delta from that row alone instead of a dense pass.
        const double g = 2.0 * residual * inv_m;
        {
            const int l = L - 1;
            const int n_in = net.dims[static_cast<size_t>(l)];
            const auto& x = ws.act[static_cast<size_t>(l)];
            double* dw = &grads.weights[static_cast<size_t>(l)]
                                       [static_cast<size_t>(head) * static_cast<size_t>(n_in)];
            const double* wrow = &net.weights[static_cast<size_t>(l)]
                                             [static_cast<size_t>(head) *
                                              static_cast<size_t>(n_in)];
            for (int i = 0; i < n_in; ++i) {
                dw[i] += g * x[static_cast<size_t>(i)];
                ws.delta[static_cast<size_t>(l)][static_cast<size_t>(i)] =
                    g * wrow[i];
            }
            grads.biases[static_cast<size_t>(l)][static_cast<size_t>(head)] += g;
        }

        for (int l = L - 2; l >= 0; --l) {
            const int n_in = net.dims[static_cast<size_t>(l)];
            const int n_out = net.dims[static_cast<size_t>(l) + 1];
            const auto& x = ws.act[static_cast<size_t>(l)];
            const auto& y = ws.act[static_cast<size_t>(l) + 1]; // post-ReLU
            auto& d_out = ws.delta[static_cast<size_t>(l) + 1];
            auto& d_in = ws.delta[static_cast<size_t>(l)];
            std::fill(d_in.begin(), d_in.end(), 0.0);
            for (int o = 0; o < n_out; ++o) {
                // ReLU gate: a zero post-activation means the unit was
                // clamped, so nothing flows through it.
                if (y[static_cast<size_t>(o)] <= 0.0) continue;
                const double go = d_out[static_cast<size_t>(o)];
                if (go == 0.0) continue;
                double* dw = &grads.weights[static_cast<size_t>(l)]
                                           [static_cast<size_t>(o) * static_cast<size_t>(n_in)];
                const double* wrow =
                    &net.weights[static_cast<size_t>(l)]
                                [static_cast<size_t>(o) * static_cast<size_t>(n_in)];
                for (int i = 0; i < n_in; ++i) {
                    dw[i] += go * x[static_cast<size_t>(i)];
                    d_in[static_cast<size_t>(i)] += go * wrow[i];
                }
                grads.biases[static_cast<size_t>(l)][static_cast<size_t>(o)] += go;
            }
        }
    }
    return loss;
}

/// Adam optimizer state (canonical constants; only the learning rate is
/// meant to be tuned).
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long t = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

    static AdamState for_net(const Mlp& net, double lr = 1e-3) {
        AdamState s;
        s.learning_rate = lr;
        s.m_w.resize(net.weights.size());
        s.v_w.resize(net.weights.size());
        s.m_b.resize(net.biases.size());
        s.v_b.resize(net.biases.size());
        for (size_t l = 0; l < net.weights.size(); ++l) {
            s.m_w[l].assign(net.weights[l].size(), 0.0);
            s.v_w[l].assign(net.weights[l].size(), 0.0);
            s.m_b[l].assign(net.biases[l].size(), 0.0);
            s.v_b[l].assign(net.biases[l].size(), 0.0);
        }
        return s;
    }
};

namespace detail {
inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, const AdamState& s,
                        double bc1, double bc2) {
    for (size_t i = 0; i < param.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}
} // namespace detail

/// Standard bias-corrected Adam step over all parameters.
inline void adam_step(AdamState& state, Mlp& net, const MlpGrads& grads) {
    if (grads.weights.size() != net.weights.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t l = 0; l < net.weights.size(); ++l) {
        detail::adam_update(net.weights[l], grads.weights[l], state.m_w[l], state.v_w[l], state,
                            bc1, bc2);
        detail::adam_update(net.biases[l], grads.biases[l], state.m_b[l], state.v_b[l], state,
                            bc1, bc2);
    }
}

/// Checkpoint format "riskq-mlp 1": plain text, dims line then one line per
/// parameter block in C hexfloat, which round-trips doubles bit-exactly.
inline void save_mlp(const Mlp& net, std::ostream& out) {
    out << "riskq-mlp 1\n";
    out << "dims";
    for (int d : net.dims) out << ' ' << d;
    out << '\n';
    char buf[40];
    auto dump = [&](const char* tag, const std::vector<double>& xs) {
        out << tag;
        for (double x : xs) {
            std::snprintf(buf, sizeof buf, " %a", x);
            out << buf;
        }
        out << '\n';
    };
    for (size_t l = 0; l < net.weights.size(); ++l) {
        dump("W", net.weights[l]);
        dump("b", net.biases[l]);
    }
}

inline void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mlp: cannot open '" + path + "'");
    save_mlp(net, out);
}

inline Mlp load_mlp(std::istream& in) {
    std::string header;
    std::getline(in, header);
    if (header != "riskq-mlp 1")
        throw std::runtime_error("load_mlp: unsupported checkpoint header '" + header + "'");
    std::string line;
    std::getline(in, line);
    std::istringstream dims_line(line);
    std::string tag;
    dims_line >> tag;
    if (tag != "dims") throw std::runtime_error("load_mlp: missing dims line");
    std::vector<int> dims;
    for (int d; dims_line >> d;) dims.push_back(d);
    Mlp net = Mlp::zeros(dims);
    auto read_block = [&](const char* want, std::vector<double>& xs) {
        if (!std::getline(in, line)) throw std::runtime_error("load_mlp: truncated checkpoint");
        std::istringstream block(line);
        std::string t;
        block >> t;
        if (t != want) throw std::runtime_error("load_mlp: expected block " + std::string(want));
        for (auto& x : xs) {
            std::string tok;
            if (!(block >> tok)) throw std::runtime_error("load_mlp: short parameter block");
            x = std::strtod(tok.c_str(), nullptr);
        }
    };
    for (size_t l = 0; l < net.weights.size(); ++l) {
        read_block("W", net.weights[l]);
        read_block("b", net.biases[l]);
    }
    return net;
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mlp: cannot open '" + path + "'");
    return load_mlp(in);
}

} // namespace riskq
