// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ticktack/annotate.hpp"
#include "ticktack/autodiff.hpp"
#include "ticktack/parameters.hpp"
#include "ticktack/temporal_geometry.hpp"

namespace ticktack {

/// Decoder-only transformer: learned token and position embeddings, pre-norm
/// blocks (RMS norm, causal multi-head attention, GELU MLP with 4x width),
/// final RMS norm and an untied output projection. No biases.
struct ModelConfig {
    int vocab_size = 256;
    int dim = 32;
    int n_layers = 2;
    int n_heads = 4;
    int max_seq_len = 96;
    int adapter_rank = 0;  // 0 trains every weight; r > 0 freezes them and trains rank-r adapters
    std::uint64_t seed = 1;

    void validate() const;
    [[nodiscard]] int head_dim() const { return dim / n_heads; }
};

enum class InjectionMode { AllPositions, MentionPositions };

struct InjectionOptions {
    bool enabled = true;
    InjectionMode mode = InjectionMode::AllPositions;
};

/// Tensor order (the flat view follows it):
///   tok_emb [V x d], pos_emb [L x d], then per layer i
///   layers.i.attn.{wq,wk,wv,wo} [d x d], layers.i.mlp.w1 [d x 4d],
///   layers.i.mlp.w2 [4d x d], each linear followed by its
///   <name>.lora_a [in x r] and <name>.lora_b [r x out] when r > 0;
///   finally lm_head [d x V].
/// Adapter factors lora_b start at zero, so an adapted model computes
/// exactly what its base does until the first update.
ParameterSet init_parameters(const ModelConfig& cfg);

/// The linear layers carrying adapters, in tensor order.
std::vector<std::string> linear_layer_names(const ModelConfig& cfg);

using EmbeddingMatrix = Eigen::MatrixXd;  // l x d

/// h' = h + te_x + te_y on the selected rows. `positions` is consulted only in
/// MentionPositions mode. Throws Error{DimensionMismatch}.
EmbeddingMatrix inject(const EmbeddingMatrix& h, const Eigen::VectorXd& te_x,
                       const Eigen::VectorXd& te_y, InjectionMode mode,
                       std::span<const int> positions = {});

struct ForwardVars {
    ad::Var logits;  // l x V
    ad::Var hidden;  // l x d, final-layer states after the last norm
};

/// Tape leaves for every tensor; frozen tensors never require gradients.
std::vector<ad::Var> parameter_leaves(ad::Tape& tape, const ParameterSet& params,
                                      bool all_trainable = false);

/// Differentiable forward pass. When injection is enabled and the sequence has
/// a class label, the temporal encoding of its first mention is added to the
/// input embeddings. Throws Error{DimensionMismatch} / Error{SequenceTooLong}.
ForwardVars forward(ad::Tape& tape, std::span<const ad::Var> leaves, const ModelConfig& cfg,
                    const AnnotatedSequence& seq, const EncodingConfig& enc,
                    const InjectionOptions& injection);

struct ForwardResult {
    Eigen::MatrixXd logits;
    EmbeddingMatrix hidden;
};

ForwardResult forward(const ParameterSet& params, const ModelConfig& cfg,
                      const AnnotatedSequence& seq, const EncodingConfig& enc,
                      const InjectionOptions& injection);

/// Mean cross-entropy of logits rows against targets. Throws
/// Error{DimensionMismatch} on a count mismatch and Error{EmptySequence}
/// when there is nothing to predict.
double ntp_loss(const Eigen::MatrixXd& logits, std::span<const int> targets);

/// Next-token loss of a sequence on the tape (rows 0..l-2 predict tokens 1..l-1).
ad::Var sequence_ntp_loss(const ForwardVars& fwd, const AnnotatedSequence& seq);

/// Mean of the final-layer states. Throws Error{EmptySequence}.
Eigen::RowVectorXd sentence_embedding(const EmbeddingMatrix& hidden);

struct GradientResult {
    double loss = 0.0;
    ParameterSet gradient;  // same layout as the parameters
};

using LossClosure = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Reverse-mode gradient of a scalar loss built by `closure` from the
/// parameter leaves. Frozen tensors get zero gradient unless `all_trainable`.
/// Throws Error{NonFiniteLoss}.
GradientResult gradients(const LossClosure& closure, const ParameterSet& params,
                         bool all_trainable = false);

}  // namespace ticktack
