// SPDX-License-Identifier: Apache-2.0

#include "ticktack/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "ticktack/error.hpp"
#include "ticktack/parallel.hpp"

namespace ticktack {

std::size_t ClassPartition::member_count() const {
    std::size_t n = 0;
    for (const auto& [k, members] : classes) n += members.size();
    return n;
}

void TrainingConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (!(delta >= 0.0 && delta <= 1.0)) fail("training.delta must lie in [0, 1]");
    if (!(sigma >= 0.0)) fail("training.sigma must be >= 0");
    if (!(lambda >= 0.0)) fail("training.lambda must be >= 0");
    if (!(learning_rate > 0.0)) fail("training.learning_rate must be > 0");
    if (batch_size < 1) fail("training.batch_size must be >= 1");
    if (grad_accum_steps < 1) fail("training.grad_accum_steps must be >= 1");
    if (epochs < 0) fail("training.epochs must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("training.adam_beta1 must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("training.adam_beta2 must lie in [0, 1)");
    if (!(adam_eps > 0.0)) fail("training.adam_eps must be > 0");
}

double cosine_similarity(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "cosine_similarity: sizes differ");
    const double nu = u.norm();
    const double nv = v.norm();
    if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine_similarity: zero vector");
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

ClassPartition partition(std::span<const LabeledEmbedding> batch) {
    ClassPartition p;
    p.universe = batch.size();
    for (const auto& item : batch) {
        if (item.sequence == nullptr || !item.sequence->class_label) continue;
        if (!item.embedding.allFinite()) {
            throw Error(ErrorCode::NonFiniteLoss, "partition: embedding has non-finite entries");
        }
        p.classes[item.sequence->class_label->value()].push_back(item.embedding);
    }
    return p;
}

AlignmentLoss intra_inter_loss(const ClassPartition& p, double delta) {
    if (p.member_count() == 0) throw Error(ErrorCode::EmptyPartition, "intra_inter_loss: empty partition");
    double intra_sum = 0.0;
    double inter_sum = 0.0;
    std::size_t intra_pairs = 0;
    std::size_t inter_pairs = 0;
    for (const auto& [k, members] : p.classes) {
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = 0; j < members.size(); ++j) {
                if (i == j) continue;
                intra_sum += cosine_similarity(members[i], members[j]);
                ++intra_pairs;
            }
            for (const auto& [k2, others] : p.classes) {
                if (k2 == k) continue;
                for (const auto& v : others) {
                    inter_sum += cosine_similarity(members[i], v);
                    ++inter_pairs;
                }
            }
        }
    }
    AlignmentLoss loss;
    loss.intra = intra_pairs > 0 ? 1.0 - intra_sum / static_cast<double>(intra_pairs) : 0.0;
    loss.inter = inter_pairs > 0 ? inter_sum / static_cast<double>(inter_pairs) : 0.0;
    loss.total = delta * loss.intra + (1.0 - delta) * loss.inter;
    return loss;
}

double ewc_penalty(const ParameterSet& theta_t, const ParameterSet& theta_g,
                   const FisherDiagonal& fisher, double lambda) {
    require_same_layout(theta_t, theta_g, "ewc_penalty");
    require_same_layout(theta_t, fisher.values, "ewc_penalty");
    double total = 0.0;
    for (std::size_t i = 0; i < theta_t.tensor_count(); ++i) {
        const auto diff = (theta_t[i].value - theta_g[i].value).array();
        total += (fisher.values[i].value.array() * diff.square()).sum();
    }
    return 0.5 * lambda * total;
}

double temporal_loss(const ClassPartition& p, double delta, const ParameterSet& theta_t,
                     const ParameterSet& theta_g, const FisherDiagonal& fisher, double lambda) {
    return intra_inter_loss(p, delta).total + ewc_penalty(theta_t, theta_g, fisher, lambda);
}

double final_loss(double ntp, double temporal, double sigma) { return ntp + sigma * temporal; }

namespace {

ad::Var scalar_constant(ad::Tape& tape, double v) { return tape.constant(ad::Matrix::Constant(1, 1, v)); }

bool usable(const AnnotatedSequence& seq) { return seq.tokens.size() >= 2; }

ParameterSet collect_gradient(std::span<const ad::Var> leaves, const ParameterSet& params) {
    ParameterSet g = params.zeros_like();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto& grad = leaves[i].grad();
        if (grad.size() != 0) g[i].value = grad;
    }
    return g;
}

}  // namespace

FisherDiagonal estimate_fisher(const ParameterSet& params, std::span<const AnnotatedSequence> data,
                               std::size_t samples, const ModelConfig& model_cfg,
                               const EncodingConfig& enc, const InjectionOptions& injection,
                               int threads) {
    if (samples < 1) throw Error(ErrorCode::InsufficientData, "estimate_fisher: samples must be >= 1");
    std::vector<const AnnotatedSequence*> pool;
    for (const auto& seq : data) {
        if (usable(seq)) pool.push_back(&seq);
        if (pool.size() == samples) break;
    }
    if (pool.size() < samples) {
        throw Error(ErrorCode::InsufficientData, "estimate_fisher: " + std::to_string(samples) +
                                                     " samples requested, " +
                                                     std::to_string(pool.size()) + " available");
    }
    FisherDiagonal fisher{params.zeros_like(), samples};
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, threads)) * 4;
    for (std::size_t start = 0; start < samples; start += chunk) {
        const std::size_t n = std::min(chunk, samples - start);
        std::vector<ParameterSet> squared(n);
        parallel_for(n, threads, [&](std::size_t i) {
            const AnnotatedSequence& seq = *pool[start + i];
            auto result = gradients(
                [&](ad::Tape& tape, std::span<const ad::Var> leaves) {
                    return sequence_ntp_loss(forward(tape, leaves, model_cfg, seq, enc, injection), seq);
                },
                params, /*all_trainable=*/true);
            for (auto& t : result.gradient) t.value = t.value.array().square().matrix();
            squared[i] = std::move(result.gradient);
        });
        for (const auto& s : squared) fisher.values.axpy(1.0, s);
    }
    for (auto& t : fisher.values) t.value /= static_cast<double>(samples);
    return fisher;
}

AlignmentVars alignment_loss_vars(ad::Tape& tape, std::span<const ad::Var> pooled,
                                  std::span<const int> labels, double delta) {
    if (pooled.empty()) throw Error(ErrorCode::EmptyPartition, "alignment_loss_vars: no labeled rows");
    if (pooled.size() != labels.size()) {
        throw Error(ErrorCode::DimensionMismatch, "alignment_loss_vars: one label per row required");
    }
    const auto n = static_cast<Eigen::Index>(pooled.size());
    ad::Matrix intra_mask = ad::Matrix::Zero(n, n);
    ad::Matrix inter_mask = ad::Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
                intra_mask(i, j) = 1.0;
            } else {
                inter_mask(i, j) = 1.0;
            }
        }
    }
    const double intra_pairs = intra_mask.sum();
    const double inter_pairs = inter_mask.sum();
    ad::Var unit = ad::normalize_rows(pooled.size() == 1 ? pooled[0] : ad::vconcat(pooled));
    ad::Var sims = ad::matmul(unit, ad::transpose(unit));
    AlignmentVars out;
    out.intra = intra_pairs > 0
                    ? ad::add(scalar_constant(tape, 1.0),
                              ad::scale(ad::weighted_sum(sims, intra_mask), -1.0 / intra_pairs))
                    : scalar_constant(tape, 0.0);
    out.inter = inter_pairs > 0 ? ad::scale(ad::weighted_sum(sims, inter_mask), 1.0 / inter_pairs)
                                : scalar_constant(tape, 0.0);
    out.total = ad::add(ad::scale(out.intra, delta), ad::scale(out.inter, 1.0 - delta));
    return out;
}

ObjectiveVars build_objective(ad::Tape& tape, std::span<const ad::Var> leaves,
                              std::span<const AnnotatedSequence* const> batch,
                              const ParameterSet& theta_g, const FisherDiagonal* fisher,
                              const TrainingConfig& cfg, const ModelConfig& model_cfg,
                              const EncodingConfig& enc) {
    std::vector<ad::Var> ntp_terms;
    std::vector<ad::Var> pooled;
    std::vector<int> labels;
    for (const AnnotatedSequence* seq : batch) {
        if (!usable(*seq)) continue;
        auto fwd = forward(tape, leaves, model_cfg, *seq, enc, cfg.injection);
        ntp_terms.push_back(sequence_ntp_loss(fwd, *seq));
        if (seq->class_label) {
            pooled.push_back(ad::mean_rows(fwd.hidden));
            labels.push_back(seq->class_label->value());
        }
    }
    if (ntp_terms.empty()) throw Error(ErrorCode::InsufficientData, "build_objective: no usable sequences");
    ObjectiveVars v;
    v.ntp = ad::scale(ad::add_scalar_nodes(ntp_terms), 1.0 / static_cast<double>(ntp_terms.size()));
    if (pooled.empty()) {
        v.intra = v.inter = v.alignment = scalar_constant(tape, 0.0);
    } else {
        auto a = alignment_loss_vars(tape, pooled, labels, cfg.delta);
        v.intra = a.intra;
        v.inter = a.inter;
        v.alignment = a.total;
    }
    if (fisher != nullptr) {
        require_same_layout(theta_g, fisher->values, "build_objective");
        std::vector<ad::Var> parts;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            if (!leaves[i].requires_grad()) continue;  // frozen: theta_T == theta_G
            parts.push_back(ad::weighted_sq_diff(leaves[i], theta_g[i].value, fisher->values[i].value));
        }
        v.penalty = parts.empty() ? scalar_constant(tape, 0.0)
                                  : ad::scale(ad::add_scalar_nodes(parts), 0.5 * cfg.lambda);
    } else {
        if (cfg.lambda != 0.0) {
            throw Error(ErrorCode::InvalidConfig, "EWC with lambda > 0 needs a Fisher estimate");
        }
        v.penalty = scalar_constant(tape, 0.0);
    }
    v.temporal = ad::add(v.alignment, v.penalty);
    v.total = ad::add(v.ntp, ad::scale(v.temporal, cfg.sigma));
    return v;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics) {
    out << "epoch,L_NTP,L_intra,L_inter,ewc_penalty,L_final\n";
    out.precision(17);
    for (const auto& m : metrics) {
        out << m.epoch << ',' << m.ntp << ',' << m.intra << ',' << m.inter << ',' << m.ewc_penalty
            << ',' << m.final << '\n';
    }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t corpus_size,
                                                    const TrainingConfig& cfg, int epoch) {
    std::vector<std::size_t> order(corpus_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t i = 0; i < order.size(); i += bs) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
    }
    return batches;
}

TrainResult train(const ParameterSet& base, std::span<const AnnotatedSequence> corpus,
                  const TrainingConfig& cfg, const ModelConfig& model_cfg, const EncodingConfig& enc,
                  const FisherDiagonal* fisher) {
    cfg.validate();
    model_cfg.validate();
    if (cfg.lambda > 0.0 && fisher == nullptr) {
        throw Error(ErrorCode::InvalidConfig, "training.lambda > 0 requires a Fisher estimate");
    }
    if (fisher != nullptr) require_same_layout(base, fisher->values, "train");
    if (std::none_of(corpus.begin(), corpus.end(), usable)) {
        throw Error(ErrorCode::InsufficientData, "train: corpus has no sequence with two or more tokens");
    }

    TrainResult result{base, {}, 0, std::nullopt};
    ParameterSet moment1 = base.zeros_like(), moment2 = base.zeros_like();
    const auto accum = static_cast<std::size_t>(cfg.grad_accum_steps);
    bool stop = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        const auto batches = epoch_batches(corpus.size(), cfg, epoch);
        EpochMetrics m;
        m.epoch = epoch;
        std::size_t micro = 0;
        for (std::size_t s = 0; s < batches.size() && !stop; s += accum) {
            const std::size_t group = std::min(accum, batches.size() - s);
            ParameterSet step = result.params.zeros_like();
            EpochMetrics local;
            std::size_t counted = 0;
            try {
                for (std::size_t b = s; b < s + group; ++b) {
                    std::vector<const AnnotatedSequence*> batch;
                    for (std::size_t idx : batches[b]) batch.push_back(&corpus[idx]);
                    if (std::none_of(batch.begin(), batch.end(), [](auto* q) { return usable(*q); })) continue;
                    ad::Tape tape;
                    auto leaves = parameter_leaves(tape, result.params);
                    auto obj = build_objective(tape, leaves, batch, base, fisher, cfg, model_cfg, enc);
                    if (!std::isfinite(obj.total.scalar())) {
                        throw Error(ErrorCode::NonFiniteLoss, "non-finite L_final at epoch " +
                                                                  std::to_string(epoch));
                    }
                    tape.backward(obj.total);
                    step.axpy(1.0, collect_gradient(leaves, result.params));
                    local.ntp += obj.ntp.scalar();
                    local.intra += obj.intra.scalar();
                    local.inter += obj.inter.scalar();
                    local.ewc_penalty += obj.penalty.scalar();
                    local.alignment += obj.alignment.scalar();
                    local.final += obj.total.scalar();
                    ++counted;
                }
            } catch (const Error& e) {
                // a zero pooled state leaves the cosine loss undefined; stop like on overflow
                if (e.code() != ErrorCode::NonFiniteLoss && e.code() != ErrorCode::ZeroVector) throw;
                result.failure = e.what();
                stop = true;
                break;
            }
            if (counted == 0) continue;
            for (auto& t : step) t.value /= static_cast<double>(counted);
            for (std::size_t i = 0; i < step.tensor_count(); ++i) {
                if (!step[i].value.allFinite()) {
                    result.failure = "non-finite gradient in '" + step[i].name + "'";
                    stop = true;
                }
            }
            if (stop) break;
            ++result.steps;
            if (cfg.optimizer == Optimizer::Adam) {
                const double t = static_cast<double>(result.steps);
                const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
                const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
                for (std::size_t i = 0; i < step.tensor_count(); ++i) {
                    if (!result.params[i].trainable) continue;
                    auto& m = moment1[i].value;
                    auto& v = moment2[i].value;
                    const auto& g = step[i].value;
                    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
                    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
                    result.params[i].value.array() -=
                        cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
                }
            } else {
                for (std::size_t i = 0; i < step.tensor_count(); ++i) {
                    if (result.params[i].trainable) result.params[i].value += -cfg.learning_rate * step[i].value;
                }
            }
            m.ntp += local.ntp;
            m.intra += local.intra;
            m.inter += local.inter;
            m.ewc_penalty += local.ewc_penalty;
            m.alignment += local.alignment;
            m.final += local.final;
            micro += counted;
            if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) stop = true;
        }
        if (micro > 0) {
            const auto n = static_cast<double>(micro);
            m.ntp /= n;
            m.intra /= n;
            m.inter /= n;
            m.ewc_penalty /= n;
            m.alignment /= n;
            m.final /= n;
            result.metrics.push_back(m);
        }
    }
    return result;
}

ParameterSet ntp_sgd_step(const ParameterSet& params,
                          std::span<const std::vector<const AnnotatedSequence*>> micro_batches,
                          double learning_rate, const ModelConfig& model_cfg,
                          const EncodingConfig& enc, const InjectionOptions& injection) {
    ParameterSet step = params.zeros_like();
    std::size_t counted = 0;
    for (const auto& batch : micro_batches) {
        std::vector<const AnnotatedSequence*> usable_seqs;
        for (auto* seq : batch) {
            if (usable(*seq)) usable_seqs.push_back(seq);
        }
        if (usable_seqs.empty()) continue;
        auto g = gradients(
            [&](ad::Tape& tape, std::span<const ad::Var> leaves) {
                std::vector<ad::Var> losses;
                for (auto* seq : usable_seqs) {
                    losses.push_back(sequence_ntp_loss(forward(tape, leaves, model_cfg, *seq, enc, injection), *seq));
                }
                return ad::scale(ad::add_scalar_nodes(losses), 1.0 / static_cast<double>(losses.size()));
            },
            params);
        step.axpy(1.0, g.gradient);
        ++counted;
    }
    ParameterSet out = params;
    if (counted == 0) return out;
    for (auto& t : step) t.value /= static_cast<double>(counted);
    for (std::size_t i = 0; i < out.tensor_count(); ++i) {
        if (out[i].trainable) out[i].value += -learning_rate * step[i].value;
    }
    return out;
}

}  // namespace ticktack
