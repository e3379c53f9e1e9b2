// SPDX-License-Identifier: Apache-2.0

#include "ticktack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <random>

#include "ticktack/alignment.hpp"
#include "ticktack/error.hpp"
#include "ticktack/parallel.hpp"

namespace ticktack {

namespace {

constexpr std::string_view kPlaceholder = "{year}";
constexpr std::string_view kBlank = "____";

std::size_t count_of(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string_view::npos; p = s.find(needle, p + needle.size())) ++n;
    return n;
}

Eigen::MatrixXd unit_rows(std::span<const Eigen::RowVectorXd> rows) {
    if (rows.empty()) return {};
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != out.cols()) throw Error(ErrorCode::DimensionMismatch, "embedding widths differ");
        const double n = rows[i].norm();
        if (n == 0.0) throw Error(ErrorCode::ZeroVector, "zero embedding at row " + std::to_string(i));
        out.row(static_cast<Eigen::Index>(i)) = rows[i] / n;
    }
    return out;
}

Eigen::MatrixXd cosine_matrix(std::span<const Eigen::RowVectorXd> rows) {
    const Eigen::MatrixXd u = unit_rows(rows);
    Eigen::MatrixXd c = (u * u.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
    c.diagonal().setOnes();
    return c;
}

}  // namespace

SimilarityMatrix similarity_from_embeddings(std::vector<GregorianYear> years,
                                            std::span<const Eigen::RowVectorXd> embeddings) {
    if (years.size() != embeddings.size())
        throw Error(ErrorCode::DimensionMismatch, "one embedding per year expected");
    return {std::move(years), cosine_matrix(embeddings)};
}

SimilarityMatrix year_similarity_matrix(const ParameterSet& params, const ModelConfig& model_cfg,
                                        const EncodingConfig& enc, const Tokenizer& tokenizer,
                                        std::span<const GregorianYear> years,
                                        std::string_view probe_template,
                                        const InjectionOptions& injection, int threads) {
    if (count_of(probe_template, kPlaceholder) != 1)
        throw Error(ErrorCode::InvalidConfig, "probe template needs exactly one {year}");
    const auto at = probe_template.find(kPlaceholder);
    std::vector<Eigen::RowVectorXd> rows(years.size());
    parallel_for(years.size(), threads, [&](std::size_t i) {
        std::string text(probe_template.substr(0, at));
        text += format_mention(years[i]);
        text += probe_template.substr(at + kPlaceholder.size());
        const auto seq = annotate(text, tokenizer);
        rows[i] = sentence_embedding(forward(params, model_cfg, seq, enc, injection).hidden);
    });
    return similarity_from_embeddings({years.begin(), years.end()}, rows);
}

TermContrast term_contrast(const SimilarityMatrix& m) {
    TermContrast t;
    double same = 0.0, diff = 0.0;
    const auto n = m.years.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (to_cycle_index(m.years[i]) == to_cycle_index(m.years[j])) {
                same += v;
                ++t.same_term_pairs;
            } else {
                diff += v;
                ++t.different_term_pairs;
            }
        }
    }
    if (t.same_term_pairs) t.same_term_mean = same / static_cast<double>(t.same_term_pairs);
    if (t.different_term_pairs) t.different_term_mean = diff / static_cast<double>(t.different_term_pairs);
    return t;
}

ClusteringMetrics clustering_metrics(std::span<const Eigen::RowVectorXd> embeddings,
                                     std::span<const int> labels) {
    if (embeddings.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "one label per embedding expected");
    std::vector<int> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw Error(ErrorCode::DegeneratePartition, "need at least two classes");

    const Eigen::MatrixXd c = cosine_matrix(embeddings);
    const auto n = embeddings.size();
    const auto k = classes.size();
    auto slot = [&](int label) {
        return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), label) - classes.begin());
    };
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[slot(l)];

    ClusteringMetrics m;
    double intra = 0.0, inter = 0.0, total_s = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    std::vector<double> dist_sum(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        const auto own = slot(labels[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double cos = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const auto other = slot(labels[j]);
            dist_sum[other] += 1.0 - cos;
            if (other == own) {
                intra += cos;
                ++n_intra;
            } else {
                inter += cos;
                ++n_inter;
            }
        }
        if (sizes[own] < 2) continue;  // singleton: s = 0
        const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < k; ++q) {
            if (q != own) b = std::min(b, dist_sum[q] / static_cast<double>(sizes[q]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total_s += (b - a) / denom;
    }
    m.silhouette = total_s / static_cast<double>(n);
    if (n_intra) m.intra_mean = intra / static_cast<double>(n_intra);
    if (n_inter) m.inter_mean = inter / static_cast<double>(n_inter);
    return m;
}

const std::vector<EraBucket>& era_buckets() {
    static const std::vector<EraBucket> buckets = {
        {"BCE", GregorianYear::kMin, -1},  {"1-500", 1, 500},         {"501-1000", 501, 1000},
        {"1001-1500", 1001, 1500},         {"1501-2000", 1501, 2000}, {"2001+", 2001, GregorianYear::kMax},
    };
    return buckets;
}

const EraBucket& era_bucket_of(GregorianYear year) {
    for (const auto& b : era_buckets()) {
        if (year.value() >= b.lo && year.value() <= b.hi) return b;
    }
    throw Error(ErrorCode::OutOfRange, "no era bucket for " + format_year(year));
}

std::string SyntheticQaItem::filled(int option) const {
    const auto at = question.find(kBlank);
    if (at == std::string::npos) throw Error(ErrorCode::InvalidConfig, "question has no blank");
    return question.substr(0, at) + options.at(static_cast<std::size_t>(option)) +
           question.substr(at + kBlank.size());
}

void write_items_jsonl(std::ostream& out, std::span<const SyntheticQaItem> items) {
    for (const auto& it : items) {
        nlohmann::json j;
        j["question"] = it.question;
        j["options"] = it.options;
        j["answer_index"] = it.answer_index;
        j["year"] = it.year.value();
        j["bucket"] = it.bucket;
        out << j.dump() << '\n';
    }
}

std::vector<SyntheticQaItem> read_items_jsonl(std::istream& in) {
    std::vector<SyntheticQaItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& what) {
            return Error(ErrorCode::ParseError, "item line " + std::to_string(lineno) + ": " + what);
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw fail(e.what());
        }
        SyntheticQaItem it;
        try {
            it.question = j.at("question").get<std::string>();
            const auto& opts = j.at("options");
            if (!opts.is_array() || opts.size() != 4) throw fail("options must hold four strings");
            for (std::size_t i = 0; i < 4; ++i) it.options[i] = opts[i].get<std::string>();
            it.answer_index = j.at("answer_index").get<int>();
            it.year = GregorianYear(j.at("year").get<int>());
            it.bucket = j.at("bucket").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw fail(e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ParseError) throw;
            throw fail(e.what());
        }
        if (it.answer_index < 0 || it.answer_index > 3) throw fail("answer_index outside [0, 3]");
        if (count_of(it.question, kBlank) != 1) throw fail("question needs exactly one blank");
        if (it.bucket != era_bucket_of(it.year).label) throw fail("bucket does not match year");
        items.push_back(std::move(it));
    }
    return items;
}

AnnotatedSequence annotate_anchored(std::string_view text, const Tokenizer& tokenizer,
                                    std::size_t anchor_offset) {
    auto seq = annotate(text, tokenizer);
    auto it = std::find_if(seq.mentions.begin(), seq.mentions.end(),
                           [&](const YearMention& m) { return m.char_span.start >= anchor_offset; });
    if (it != seq.mentions.end()) {
        std::rotate(seq.mentions.begin(), it, std::next(it));
        seq.class_label = to_cycle_index(seq.mentions.front().year);
    }
    return seq;
}

QaPrompt build_prompt(const SyntheticQaItem& item, std::size_t item_index,
                      std::span<const SyntheticQaItem> pool, int shots, std::uint64_t seed) {
    if (shots < 0) throw Error(ErrorCode::InvalidConfig, "shots must be >= 0");
    if (pool.size() < static_cast<std::size_t>(shots))
        throw Error(ErrorCode::InsufficientData, "exemplar pool smaller than shot count");
    QaPrompt p;
    if (shots > 0) {
        std::mt19937_64 rng(seed * 1000003u + item_index);
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        // partial Fisher-Yates; std::shuffle's draw pattern is library-specific
        for (int s = 0; s < shots; ++s) {
            const auto remaining = idx.size() - static_cast<std::size_t>(s);
            const auto pick = static_cast<std::size_t>(s) + static_cast<std::size_t>(rng() % remaining);
            std::swap(idx[static_cast<std::size_t>(s)], idx[pick]);
            const auto& ex = pool[idx[static_cast<std::size_t>(s)]];
            p.context += ex.filled(ex.answer_index);
            p.context += ' ';
        }
    }
    p.query_offset = p.context.size();
    p.context += item.question.substr(0, item.question.find(kBlank));
    return p;
}

namespace {

double option_score(const ParameterSet& params, const ModelConfig& model_cfg, const EncodingConfig& enc,
                    const Tokenizer& tokenizer, const QaPrompt& prompt, const std::string& full,
                    const InjectionOptions& injection) {
    const auto prefix = tokenizer.encode(prompt.context);
    const auto seq = annotate_anchored(full, tokenizer, prompt.query_offset);
    const auto np = prefix.ids.size();
    if (seq.tokens.size() <= np || !std::equal(prefix.ids.begin(), prefix.ids.end(), seq.tokens.begin()))
        throw Error(ErrorCode::TokenizationFailure, "option does not extend the prompt tokenization");
    const auto out = forward(params, model_cfg, seq, enc, injection);
    double total = 0.0;
    for (std::size_t p = np; p < seq.tokens.size(); ++p) {
        const auto row = out.logits.row(static_cast<Eigen::Index>(p - 1));
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        total += row(seq.tokens[p]) - lse;
    }
    return total / static_cast<double>(seq.tokens.size() - np);
}

}  // namespace

EraReport evaluate_qa(const ParameterSet& params, const ModelConfig& model_cfg,
                      const EncodingConfig& enc, const Tokenizer& tokenizer,
                      std::span<const SyntheticQaItem> items, std::span<const SyntheticQaItem> pool,
                      const QaOptions& options) {
    EraReport r;
    r.shots = options.shots;
    r.predictions.assign(items.size(), 0);
    parallel_for(items.size(), options.threads, [&](std::size_t i) {
        const auto& item = items[i];
        const auto prompt = build_prompt(item, i, pool, options.shots, options.seed);
        double best = -std::numeric_limits<double>::infinity();
        int choice = 0;
        for (int o = 0; o < 4; ++o) {
            const auto full = prompt.context.substr(0, prompt.query_offset) + item.filled(o);
            const double s = option_score(params, model_cfg, enc, tokenizer, prompt, full, options.injection);
            if (s > best) {
                best = s;
                choice = o;
            }
        }
        r.predictions[i] = choice;
    });
    for (const auto& b : era_buckets()) r.buckets.push_back({b, 0, 0});
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& b = era_bucket_of(items[i].year);
        auto it = std::find_if(r.buckets.begin(), r.buckets.end(),
                               [&](const BucketResult& x) { return x.bucket.label == b.label; });
        const bool ok = r.predictions[i] == items[i].answer_index;
        ++it->items;
        ++r.items;
        if (ok) {
            ++it->correct;
            ++r.correct;
        }
    }
    return r;
}

void write_report_json(std::ostream& out, const EraReport& report) {
    nlohmann::json j;
    j["shots"] = report.shots;
    j["items"] = report.items;
    j["correct"] = report.correct;
    j["accuracy"] = report.accuracy();
    auto& arr = j["buckets"] = nlohmann::json::array();
    for (const auto& b : report.buckets) {
        nlohmann::json e;
        e["bucket"] = b.bucket.label;
        e["lo"] = b.bucket.lo;
        e["hi"] = b.bucket.hi;
        e["items"] = b.items;
        e["correct"] = b.correct;
        e["accuracy"] = b.items ? nlohmann::json(b.accuracy()) : nlohmann::json(nullptr);
        arr.push_back(std::move(e));
    }
    out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const EraReport& report) {
    out << "bucket,lo,hi,items,correct,accuracy\n";
    out << std::setprecision(6);
    for (const auto& b : report.buckets) {
        out << b.bucket.label << ',' << b.bucket.lo << ',' << b.bucket.hi << ',' << b.items << ','
            << b.correct << ',';
        if (b.items) out << b.accuracy();
        out << '\n';
    }
}

void write_embedding_csv(std::ostream& out, std::span<const GregorianYear> years,
                         std::span<const Eigen::RowVectorXd> embeddings) {
    if (years.size() != embeddings.size())
        throw Error(ErrorCode::DimensionMismatch, "one embedding per year expected");
    out << "year,class";
    const Eigen::Index d = embeddings.empty() ? 0 : embeddings.front().size();
    for (Eigen::Index k = 0; k < d; ++k) out << ",e" << k;
    out << '\n' << std::setprecision(9);
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (embeddings[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "ragged embeddings");
        out << years[i].value() << ',' << to_cycle_index(years[i]).value();
        for (Eigen::Index k = 0; k < embeddings[i].size(); ++k) out << ',' << embeddings[i](k);
        out << '\n';
    }
}

}  // namespace ticktack
