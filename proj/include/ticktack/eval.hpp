// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ticktack/annotate.hpp"
#include "ticktack/calendar.hpp"
#include "ticktack/model.hpp"
#include "ticktack/tokenizer.hpp"

namespace ticktack {

struct SimilarityMatrix {
    std::vector<GregorianYear> years;
    Eigen::MatrixXd values;  // symmetric, unit diagonal
};

/// Cosine similarities between pooled final states of `probe_template` filled
/// with each year ("{year}" is replaced by the formatted year). Throws
/// Error{InvalidConfig} unless the template has exactly one placeholder.
SimilarityMatrix year_similarity_matrix(const ParameterSet& params, const ModelConfig& model_cfg,
                                        const EncodingConfig& enc, const Tokenizer& tokenizer,
                                        std::span<const GregorianYear> years,
                                        std::string_view probe_template,
                                        const InjectionOptions& injection, int threads = 1);

SimilarityMatrix similarity_from_embeddings(std::vector<GregorianYear> years,
                                            std::span<const Eigen::RowVectorXd> embeddings);

struct TermContrast {
    double same_term_mean = 0.0;
    double different_term_mean = 0.0;
    std::size_t same_term_pairs = 0;
    std::size_t different_term_pairs = 0;
};

/// Mean off-diagonal similarity of same-term year pairs versus different-term pairs.
TermContrast term_contrast(const SimilarityMatrix& m);

struct ClusteringMetrics {
    double silhouette = 0.0;
    double intra_mean = 0.0;  // mean cosine over same-class ordered pairs
    double inter_mean = 0.0;  // mean cosine over cross-class ordered pairs
};

/// Silhouette under cosine distance (1 - cos) with the usual convention that
/// members of singleton classes score 0. Throws Error{DegeneratePartition}
/// unless at least two classes are present.
ClusteringMetrics clustering_metrics(std::span<const Eigen::RowVectorXd> embeddings,
                                     std::span<const int> labels);

struct EraBucket {
    std::string label;
    int lo = 0;  // inclusive Gregorian years
    int hi = 0;
};

/// BCE, 1-500, 501-1000, 1001-1500, 1501-2000, after 2000.
const std::vector<EraBucket>& era_buckets();
const EraBucket& era_bucket_of(GregorianYear year);

struct SyntheticQaItem {
    std::string question;  // contains one "____" blank
    std::array<std::string, 4> options;
    int answer_index = 0;
    GregorianYear year{1};
    std::string bucket;

    /// The question with the blank filled by option i.
    [[nodiscard]] std::string filled(int option) const;
};

void write_items_jsonl(std::ostream& out, std::span<const SyntheticQaItem> items);
std::vector<SyntheticQaItem> read_items_jsonl(std::istream& in);

struct BucketResult {
    EraBucket bucket;
    std::size_t items = 0;
    std::size_t correct = 0;
    [[nodiscard]] double accuracy() const { return items ? static_cast<double>(correct) / static_cast<double>(items) : 0.0; }
};

struct EraReport {
    std::vector<BucketResult> buckets;
    std::size_t items = 0;
    std::size_t correct = 0;
    int shots = 0;
    std::vector<int> predictions;  // chosen option per item

    [[nodiscard]] double accuracy() const { return items ? static_cast<double>(correct) / static_cast<double>(items) : 0.0; }
};

struct QaOptions {
    int shots = 0;
    std::uint64_t seed = 1;  // exemplar draw
    InjectionOptions injection;
    int threads = 1;
};

/// Builds the k-shot prompt for an item: `shots` completed exemplars drawn
/// from `pool`, then the question text up to its blank. The returned
/// sequence anchors temporal injection on the question's own year.
struct QaPrompt {
    std::string context;
    std::size_t query_offset = 0;  // where the question starts inside context
};
QaPrompt build_prompt(const SyntheticQaItem& item, std::size_t item_index,
                      std::span<const SyntheticQaItem> pool, int shots, std::uint64_t seed);

/// Annotates `text` and moves the first mention at or after `anchor_offset` to
/// the front, so injection uses that year.
AnnotatedSequence annotate_anchored(std::string_view text, const Tokenizer& tokenizer,
                                    std::size_t anchor_offset);

/// Picks, per item, the option whose completion has the highest mean token
/// log-likelihood (ties go to the lowest index) and aggregates by era bucket.
EraReport evaluate_qa(const ParameterSet& params, const ModelConfig& model_cfg,
                      const EncodingConfig& enc, const Tokenizer& tokenizer,
                      std::span<const SyntheticQaItem> items, std::span<const SyntheticQaItem> pool,
                      const QaOptions& options);

void write_report_json(std::ostream& out, const EraReport& report);
void write_report_csv(std::ostream& out, const EraReport& report);

/// Header "year,class,e0,...", then one row per embedding: year, class, d coordinates.
void write_embedding_csv(std::ostream& out, std::span<const GregorianYear> years,
                         std::span<const Eigen::RowVectorXd> embeddings);

}  // namespace ticktack
