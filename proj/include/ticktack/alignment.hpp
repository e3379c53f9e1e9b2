// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ticktack/annotate.hpp"
#include "ticktack/autodiff.hpp"
#include "ticktack/model.hpp"
#include "ticktack/parameters.hpp"

namespace ticktack {

/// Sentence embeddings grouped by sexagenary class.
struct ClassPartition {
    std::map<int, std::vector<Eigen::RowVectorXd>> classes;
    std::size_t universe = 0;  // sequences offered, labeled or not

    [[nodiscard]] std::size_t member_count() const;
};

struct FisherDiagonal {
    ParameterSet values;  // entries >= 0, same layout as the model parameters
    std::size_t sample_count = 0;
};

enum class Optimizer { Sgd, Adam };

struct TrainingConfig {
    double delta = 0.5;   // mix of the intra- and inter-class terms
    double sigma = 1.0;   // weight of the temporal objective in the final loss
    double lambda = 100.0;  // EWC strength
    double learning_rate = 1e-4;
    int batch_size = 8;
    int grad_accum_steps = 2;
    int epochs = 10;
    std::uint64_t seed = 1;
    std::size_t max_steps = 0;  // 0 runs every epoch to completion
    Optimizer optimizer = Optimizer::Sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    InjectionOptions injection;

    void validate() const;
};

/// Throws Error{ZeroVector} when either vector has zero norm.
double cosine_similarity(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v);

struct LabeledEmbedding {
    const AnnotatedSequence* sequence = nullptr;
    Eigen::RowVectorXd embedding;
};

/// Groups embeddings by class label; unlabeled sequences are left out.
ClassPartition partition(std::span<const LabeledEmbedding> batch);

struct AlignmentLoss {
    double intra = 0.0;
    double inter = 0.0;
    double total = 0.0;  // delta * intra + (1 - delta) * inter
};

/// Intra term: 1 - mean cosine over ordered same-class pairs (i != j).
/// Inter term: mean cosine over ordered cross-class pairs. A term with no
/// pairs is 0. Throws Error{EmptyPartition} when no class has members.
AlignmentLoss intra_inter_loss(const ClassPartition& p, double delta);

/// (lambda / 2) * sum_i F_i (theta_T_i - theta_G_i)^2. Throws Error{ShapeMismatch}.
double ewc_penalty(const ParameterSet& theta_t, const ParameterSet& theta_g,
                   const FisherDiagonal& fisher, double lambda);

double temporal_loss(const ClassPartition& p, double delta, const ParameterSet& theta_t,
                     const ParameterSet& theta_g, const FisherDiagonal& fisher, double lambda);

double final_loss(double ntp, double temporal, double sigma);

/// Empirical diagonal Fisher: mean over the first `samples` sequences of the
/// squared per-sequence next-token-loss gradient. Per-sample work is spread
/// over `threads` workers and merged in sample order. Throws
/// Error{InsufficientData} when fewer than `samples` usable sequences exist.
FisherDiagonal estimate_fisher(const ParameterSet& params, std::span<const AnnotatedSequence> data,
                               std::size_t samples, const ModelConfig& model_cfg,
                               const EncodingConfig& enc, const InjectionOptions& injection,
                               int threads = 1);

/// Tape nodes of the full objective for one micro-batch.
struct ObjectiveVars {
    ad::Var ntp;
    ad::Var intra;
    ad::Var inter;
    ad::Var alignment;  // L_T
    ad::Var penalty;    // EWC
    ad::Var temporal;
    ad::Var total;      // L_final
};

/// Builds L_final = L_NTP + sigma * (L_T + EWC) over a micro-batch. L_NTP is
/// the mean of per-sequence next-token losses; L_T uses the batch's own
/// class partition of mean-pooled final states; `fisher` may be null when
/// lambda is 0.
ObjectiveVars build_objective(ad::Tape& tape, std::span<const ad::Var> leaves,
                              std::span<const AnnotatedSequence* const> batch,
                              const ParameterSet& theta_g, const FisherDiagonal* fisher,
                              const TrainingConfig& cfg, const ModelConfig& model_cfg,
                              const EncodingConfig& enc);

/// L_T on the tape from pooled rows and their labels.
struct AlignmentVars {
    ad::Var intra;
    ad::Var inter;
    ad::Var total;
};
AlignmentVars alignment_loss_vars(ad::Tape& tape, std::span<const ad::Var> pooled,
                                  std::span<const int> labels, double delta);

struct EpochMetrics {
    int epoch = 0;
    double ntp = 0.0;
    double intra = 0.0;
    double inter = 0.0;
    double ewc_penalty = 0.0;
    double final = 0.0;
    double alignment = 0.0;  // L_T
};

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics);

struct TrainResult {
    ParameterSet params;
    std::vector<EpochMetrics> metrics;
    std::size_t steps = 0;
    std::optional<std::string> failure;  // set when training stopped on a non-finite loss
};

/// Micro-batches of one epoch, as sequence indices, in the order train() visits them.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t corpus_size,
                                                    const TrainingConfig& cfg, int epoch);

/// Gradient descent (plain or Adam) on L_final starting from `base`, which is
/// also the EWC anchor.
/// Throws Error{InsufficientData} on an empty corpus and Error{InvalidConfig}
/// when lambda > 0 without a Fisher estimate.
TrainResult train(const ParameterSet& base, std::span<const AnnotatedSequence> corpus,
                  const TrainingConfig& cfg, const ModelConfig& model_cfg, const EncodingConfig& enc,
                  const FisherDiagonal* fisher);

/// One step of the plain next-token trainer: gradient of the mean next-token
/// loss averaged over micro-batches, then params -= lr * gradient.
ParameterSet ntp_sgd_step(const ParameterSet& params,
                          std::span<const std::vector<const AnnotatedSequence*>> micro_batches,
                          double learning_rate, const ModelConfig& model_cfg,
                          const EncodingConfig& enc, const InjectionOptions& injection);

}  // namespace ticktack
