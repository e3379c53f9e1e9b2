// SPDX-License-Identifier: Apache-2.0

#include "ticktack/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "ticktack/error.hpp"

namespace ticktack {

namespace {

struct TensorSpec {
    std::string name;
    Eigen::Index rows;
    Eigen::Index cols;
    enum class Kind { Embedding, Position, Linear, Residual, Head, AdapterA, AdapterB } kind;
};

std::vector<TensorSpec> tensor_layout(const ModelConfig& cfg) {
    using K = TensorSpec::Kind;
    const Eigen::Index d = cfg.dim;
    const Eigen::Index hidden = 4 * d;
    std::vector<TensorSpec> specs;
    specs.push_back({"tok_emb", cfg.vocab_size, d, K::Embedding});
    specs.push_back({"pos_emb", cfg.max_seq_len, d, K::Position});
    auto linear = [&](std::string name, Eigen::Index in, Eigen::Index out, K kind) {
        specs.push_back({name, in, out, kind});
        if (cfg.adapter_rank > 0) {
            specs.push_back({name + ".lora_a", in, cfg.adapter_rank, K::AdapterA});
            specs.push_back({name + ".lora_b", cfg.adapter_rank, out, K::AdapterB});
        }
    };
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        linear(p + "attn.wq", d, d, K::Linear);
        linear(p + "attn.wk", d, d, K::Linear);
        linear(p + "attn.wv", d, d, K::Linear);
        linear(p + "attn.wo", d, d, K::Residual);
        linear(p + "mlp.w1", d, hidden, K::Linear);
        linear(p + "mlp.w2", hidden, d, K::Residual);
    }
    specs.push_back({"lm_head", d, cfg.vocab_size, K::Head});
    return specs;
}

void check_sequence(const ModelConfig& cfg, const AnnotatedSequence& seq) {
    if (seq.tokens.empty()) throw Error(ErrorCode::EmptySequence, "forward: empty sequence");
    if (static_cast<int>(seq.tokens.size()) > cfg.max_seq_len) {
        throw Error(ErrorCode::SequenceTooLong, "forward: sequence of " +
                                                    std::to_string(seq.tokens.size()) +
                                                    " tokens exceeds max_seq_len " +
                                                    std::to_string(cfg.max_seq_len));
    }
    for (int id : seq.tokens) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw Error(ErrorCode::DimensionMismatch,
                        "forward: token id " + std::to_string(id) + " outside vocabulary");
        }
    }
}

// Walks leaves in tensor_layout order.
class LeafCursor {
public:
    LeafCursor(std::span<const ad::Var> leaves, const ModelConfig& cfg)
        : leaves_(leaves), adapters_(cfg.adapter_rank > 0) {}

    ad::Var next() {
        if (at_ >= leaves_.size()) throw Error(ErrorCode::ShapeMismatch, "forward: too few parameter leaves");
        return leaves_[at_++];
    }

    ad::Var linear(ad::Var x) {
        ad::Var w = next();
        ad::Var y = ad::matmul(x, w);
        if (adapters_) {
            ad::Var a = next();
            ad::Var b = next();
            y = ad::add(y, ad::matmul(ad::matmul(x, a), b));
        }
        return y;
    }

    [[nodiscard]] bool exhausted() const { return at_ == leaves_.size(); }

private:
    std::span<const ad::Var> leaves_;
    bool adapters_;
    std::size_t at_ = 0;
};

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (vocab_size < 1) fail("model.vocab_size must be >= 1");
    if (dim < 2 || dim % 2 != 0) fail("model.dim must be even and >= 2");
    if (n_layers < 1) fail("model.n_layers must be >= 1");
    if (n_heads < 1 || dim % n_heads != 0) fail("model.n_heads must divide model.dim");
    if (max_seq_len < 1) fail("model.max_seq_len must be >= 1");
    if (adapter_rank < 0) fail("model.adapter_rank must be >= 0");
}

ParameterSet init_parameters(const ModelConfig& cfg) {
    using K = TensorSpec::Kind;
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double residual_scale = 1.0 / std::sqrt(2.0 * cfg.n_layers);
    ParameterSet params;
    for (const auto& spec : tensor_layout(cfg)) {
        Eigen::MatrixXd m(spec.rows, spec.cols);
        double std_dev = 0.0;
        switch (spec.kind) {
            case K::Embedding: std_dev = 1.0; break;
            case K::Position: std_dev = 0.5; break;
            case K::Linear:
            case K::Head:
            case K::AdapterA: std_dev = 1.0 / std::sqrt(static_cast<double>(spec.rows)); break;
            case K::Residual: std_dev = residual_scale / std::sqrt(static_cast<double>(spec.rows)); break;
            case K::AdapterB: std_dev = 0.0; break;
        }
        // Row-major fill keeps the draw order aligned with the flat view.
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = std_dev == 0.0 ? 0.0 : std_dev * normal(rng);
            }
        }
        const bool adapter = spec.kind == K::AdapterA || spec.kind == K::AdapterB;
        const bool trainable = cfg.adapter_rank == 0 || adapter;
        params.add(spec.name, std::move(m), trainable);
    }
    return params;
}

std::vector<std::string> linear_layer_names(const ModelConfig& cfg) {
    using K = TensorSpec::Kind;
    std::vector<std::string> names;
    for (const auto& spec : tensor_layout(cfg)) {
        if (spec.kind == K::Linear || spec.kind == K::Residual) names.push_back(spec.name);
    }
    return names;
}

EmbeddingMatrix inject(const EmbeddingMatrix& h, const Eigen::VectorXd& te_x,
                       const Eigen::VectorXd& te_y, InjectionMode mode,
                       std::span<const int> positions) {
    if (te_x.size() != h.cols() || te_y.size() != h.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "inject: encoding dimension differs from d");
    }
    EmbeddingMatrix out = h;
    const Eigen::RowVectorXd offset = (te_x + te_y).transpose();
    if (mode == InjectionMode::AllPositions) {
        out.rowwise() += offset;
    } else {
        for (int p : positions) {
            if (p < 0 || p >= h.rows()) throw Error(ErrorCode::DimensionMismatch, "inject: position out of range");
            out.row(p) += offset;
        }
    }
    return out;
}

std::vector<ad::Var> parameter_leaves(ad::Tape& tape, const ParameterSet& params, bool all_trainable) {
    std::vector<ad::Var> leaves;
    leaves.reserve(params.tensor_count());
    for (const auto& t : params) leaves.push_back(tape.leaf(t.value, all_trainable || t.trainable));
    return leaves;
}

ForwardVars forward(ad::Tape& tape, std::span<const ad::Var> leaves, const ModelConfig& cfg,
                    const AnnotatedSequence& seq, const EncodingConfig& enc,
                    const InjectionOptions& injection) {
    check_sequence(cfg, seq);
    const auto l = static_cast<Eigen::Index>(seq.tokens.size());
    LeafCursor cur(leaves, cfg);
    ad::Var tok_emb = cur.next();
    ad::Var pos_emb = cur.next();
    if (tok_emb.rows() != cfg.vocab_size || tok_emb.cols() != cfg.dim) {
        throw Error(ErrorCode::ShapeMismatch, "forward: tok_emb does not match the model config");
    }
    ad::Var x = ad::add(ad::gather_rows(tok_emb, seq.tokens), ad::top_rows(pos_emb, l));

    if (injection.enabled && seq.class_label) {
        if (enc.dim != cfg.dim) {
            throw Error(ErrorCode::DimensionMismatch, "forward: encoding.dim must equal model.dim");
        }
        const auto te = encode_year<double>(seq.mentions.front().year, enc);
        const auto positions = seq.mention_positions();
        x = ad::add(x, tape.constant(inject(EmbeddingMatrix::Zero(l, cfg.dim), te.te_x, te.te_y,
                                            injection.mode, positions)));
    }

    const int dh = cfg.head_dim();
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int layer = 0; layer < cfg.n_layers; ++layer) {
        ad::Var h = ad::rms_norm_rows(x);
        ad::Var q = cur.linear(h);
        ad::Var k = cur.linear(h);
        ad::Var v = cur.linear(h);
        std::vector<ad::Var> heads;
        heads.reserve(static_cast<std::size_t>(cfg.n_heads));
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            ad::Var qh = ad::cols(q, hd * dh, dh);
            ad::Var kh = ad::cols(k, hd * dh, dh);
            ad::Var vh = ad::cols(v, hd * dh, dh);
            ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), attn_scale);
            heads.push_back(ad::matmul(ad::causal_softmax_rows(scores), vh));
        }
        ad::Var attn = heads.size() == 1 ? heads.front() : ad::hconcat(heads);
        x = ad::add(x, cur.linear(attn));
        ad::Var h2 = ad::rms_norm_rows(x);
        ad::Var mlp = cur.linear(ad::gelu(cur.linear(h2)));
        x = ad::add(x, mlp);
    }
    ad::Var hidden = ad::rms_norm_rows(x);
    ad::Var logits = ad::matmul(hidden, cur.next());
    if (!cur.exhausted()) throw Error(ErrorCode::ShapeMismatch, "forward: unused parameter leaves");
    return {logits, hidden};
}

ForwardResult forward(const ParameterSet& params, const ModelConfig& cfg,
                      const AnnotatedSequence& seq, const EncodingConfig& enc,
                      const InjectionOptions& injection) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    leaves.reserve(params.tensor_count());
    for (const auto& t : params) leaves.push_back(tape.constant(t.value));
    auto fwd = forward(tape, leaves, cfg, seq, enc, injection);
    return {fwd.logits.value(), fwd.hidden.value()};
}

double ntp_loss(const Eigen::MatrixXd& logits, std::span<const int> targets) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
        throw Error(ErrorCode::DimensionMismatch, "ntp_loss: one target per logits row required");
    }
    if (targets.empty()) throw Error(ErrorCode::EmptySequence, "ntp_loss: nothing to predict");
    ad::Tape tape;
    return ad::cross_entropy_rows(tape.constant(logits), targets).scalar();
}

ad::Var sequence_ntp_loss(const ForwardVars& fwd, const AnnotatedSequence& seq) {
    const auto l = static_cast<Eigen::Index>(seq.tokens.size());
    if (l < 2) throw Error(ErrorCode::EmptySequence, "sequence_ntp_loss: need at least two tokens");
    std::span<const int> targets(seq.tokens.data() + 1, seq.tokens.size() - 1);
    return ad::cross_entropy_rows(ad::top_rows(fwd.logits, l - 1), targets);
}

Eigen::RowVectorXd sentence_embedding(const EmbeddingMatrix& hidden) {
    if (hidden.rows() == 0) throw Error(ErrorCode::EmptySequence, "sentence_embedding: no rows");
    return hidden.colwise().mean();
}

GradientResult gradients(const LossClosure& closure, const ParameterSet& params, bool all_trainable) {
    ad::Tape tape;
    auto leaves = parameter_leaves(tape, params, all_trainable);
    ad::Var loss = closure(tape, leaves);
    const double value = loss.scalar();
    if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
    tape.backward(loss);
    GradientResult result{value, params.zeros_like()};
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto& g = leaves[i].grad();
        if (g.size() != 0) result.gradient[i].value = g;
    }
    return result;
}

}  // namespace ticktack
