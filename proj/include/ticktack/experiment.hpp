// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ticktack/checkpoint.hpp"
#include "ticktack/eval.hpp"
#include "ticktack/run_config.hpp"
#include "ticktack/synthetic.hpp"

namespace ticktack {

/// Ticktack trains the full objective with temporal injection; Pt is the
/// next-token-only control (sigma = 0, lambda = 0, no injection).
enum class TrainMode { Ticktack, Pt };
const char* to_string(TrainMode m) noexcept;
TrainMode parse_mode(const std::string& s);
TrainingConfig mode_config(TrainingConfig cfg, TrainMode mode);

/// Vocabulary over corpus texts plus every completed option of the items.
Tokenizer build_tokenizer(const std::vector<std::string>& texts,
                          std::span<const SyntheticQaItem> items = {});
std::vector<AnnotatedSequence> annotate_all(const std::vector<std::string>& texts,
                                            const Tokenizer& tokenizer);

/// Injection settings a checkpoint was trained with (from its metadata).
InjectionOptions checkpoint_injection(const Checkpoint& ckpt);

struct Trained {
    Checkpoint checkpoint;
    std::vector<EpochMetrics> metrics;
    std::optional<std::string> failure;
};

/// Next-token pretraining of theta_G from random initialization.
Trained pretrain_base(const RunConfig& cfg, const Tokenizer& tokenizer,
                      const std::vector<std::string>& general_corpus);

FisherDiagonal base_fisher(const RunConfig& cfg, const Checkpoint& base,
                           const std::vector<std::string>& corpus);

/// Fine-tunes from `base`; `fisher` may be null when the mode's lambda is 0.
Trained train_mode(const RunConfig& cfg, TrainMode mode, const Checkpoint& base,
                   const std::vector<std::string>& corpus, const FisherDiagonal* fisher);

struct ModelEvaluation {
    ClusteringMetrics clustering;   // probe embeddings of the item years, by sexagenary class
    SimilarityMatrix similarity;    // eval.similarity_from..to plus partner years
    TermContrast contrast;
    std::vector<GregorianYear> embedding_years;
    std::vector<Eigen::RowVectorXd> embeddings;
    EraReport zero_shot;
    EraReport few_shot;
};

ModelEvaluation evaluate_model(const RunConfig& cfg, const Checkpoint& ckpt,
                               std::span<const SyntheticQaItem> items,
                               std::span<const SyntheticQaItem> pool, int few_shots = 5);

/// The years behind the similarity matrix: [from, to] and, when the partner
/// offset is nonzero, each of them moved back by the offset.
std::vector<GregorianYear> similarity_years(const RunConfig& cfg);

struct DeskResult {
    Trained base;
    Trained pt;
    Trained ticktack;
    ModelEvaluation pt_eval;
    ModelEvaluation ticktack_eval;
    double seconds = 0.0;
};

/// Generates the synthetic suite, pretrains a base model, estimates its
/// Fisher diagonal, trains both modes from it and evaluates them. When
/// `out_dir` is nonempty every artifact is written there.
DeskResult run_desk_experiment(const RunConfig& cfg, const std::string& out_dir = {});

/// One CSV row per model: silhouette, intra/inter means, term contrast, QA accuracies.
void write_summary_csv(std::ostream& out, const DeskResult& r);

}  // namespace ticktack
