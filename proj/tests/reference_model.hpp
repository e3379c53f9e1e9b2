// SPDX-License-Identifier: Apache-2.0
//
// Loop-level re-implementation of the toy transformer, used as an oracle for
// the Eigen/tape version. Deliberately written without Eigen expressions.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ticktack/model.hpp"

namespace reference {

using Rows = std::vector<std::vector<double>>;

inline double w(const ticktack::ParameterSet& p, const std::string& name, int r, int c) {
    return p.at(name)(r, c);
}

inline Rows linear(const ticktack::ParameterSet& p, const ticktack::ModelConfig& cfg, const std::string& name,
                   const Rows& x) {
    const auto& W = p.at(name);
    Rows y(x.size(), std::vector<double>(static_cast<std::size_t>(W.cols()), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (int o = 0; o < W.cols(); ++o)
            for (int k = 0; k < W.rows(); ++k) y[i][o] += x[i][k] * W(k, o);
    if (cfg.adapter_rank > 0) {
        const auto& A = p.at(name + ".lora_a");
        const auto& B = p.at(name + ".lora_b");
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::vector<double> xa(static_cast<std::size_t>(A.cols()), 0.0);
            for (int r = 0; r < A.cols(); ++r)
                for (int k = 0; k < A.rows(); ++k) xa[r] += x[i][k] * A(k, r);
            for (int o = 0; o < B.cols(); ++o)
                for (int r = 0; r < B.rows(); ++r) y[i][o] += xa[r] * B(r, o);
        }
    }
    return y;
}

inline Rows rms_norm(const Rows& x) {
    Rows y = x;
    for (auto& row : y) {
        double ms = 0.0;
        for (double v : row) ms += v * v;
        ms /= static_cast<double>(row.size());
        const double inv = 1.0 / std::sqrt(ms + 1e-6);
        for (double& v : row) v *= inv;
    }
    return y;
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

struct Output {
    Rows logits;
    Rows hidden;
};

// `offset` is added to every input row listed in `rows` (all rows when empty
// and `all` is set); this mirrors temporal injection.
inline Output forward(const ticktack::ParameterSet& p, const ticktack::ModelConfig& cfg,
                      const std::vector<int>& tokens, const std::vector<double>& offset = {},
                      const std::vector<int>& rows = {}, bool all = true) {
    const int d = cfg.dim, l = static_cast<int>(tokens.size());
    Rows x(static_cast<std::size_t>(l), std::vector<double>(static_cast<std::size_t>(d)));
    for (int i = 0; i < l; ++i)
        for (int j = 0; j < d; ++j) x[i][j] = w(p, "tok_emb", tokens[i], j) + w(p, "pos_emb", i, j);
    if (!offset.empty()) {
        for (int i = 0; i < l; ++i) {
            bool hit = all;
            for (int r : rows) hit = hit || r == i;
            if (!hit) continue;
            for (int j = 0; j < d; ++j) x[i][j] += offset[j];
        }
    }
    const int dh = d / cfg.n_heads;
    for (int layer = 0; layer < cfg.n_layers; ++layer) {
        const std::string pre = "layers." + std::to_string(layer) + ".";
        const Rows h = rms_norm(x);
        const Rows q = linear(p, cfg, pre + "attn.wq", h);
        const Rows k = linear(p, cfg, pre + "attn.wk", h);
        const Rows v = linear(p, cfg, pre + "attn.wv", h);
        Rows att(static_cast<std::size_t>(l), std::vector<double>(static_cast<std::size_t>(d), 0.0));
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            for (int i = 0; i < l; ++i) {
                std::vector<double> s(static_cast<std::size_t>(i + 1));
                double mx = -1e300;
                for (int j = 0; j <= i; ++j) {
                    double dot = 0.0;
                    for (int c = 0; c < dh; ++c) dot += q[i][hd * dh + c] * k[j][hd * dh + c];
                    s[j] = dot / std::sqrt(static_cast<double>(dh));
                    mx = std::max(mx, s[j]);
                }
                double z = 0.0;
                for (double& e : s) z += (e = std::exp(e - mx));
                for (int j = 0; j <= i; ++j)
                    for (int c = 0; c < dh; ++c) att[i][hd * dh + c] += s[j] / z * v[j][hd * dh + c];
            }
        }
        const Rows o = linear(p, cfg, pre + "attn.wo", att);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < d; ++j) x[i][j] += o[i][j];
        Rows m = linear(p, cfg, pre + "mlp.w1", rms_norm(x));
        for (auto& row : m)
            for (double& e : row) e = gelu(e);
        const Rows m2 = linear(p, cfg, pre + "mlp.w2", m);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < d; ++j) x[i][j] += m2[i][j];
    }
    Output out;
    out.hidden = rms_norm(x);
    out.logits = linear(p, ticktack::ModelConfig{cfg.vocab_size, cfg.dim, cfg.n_layers, cfg.n_heads,
                                                 cfg.max_seq_len, 0, cfg.seed},
                        "lm_head", out.hidden);
    return out;
}

}  // namespace reference
