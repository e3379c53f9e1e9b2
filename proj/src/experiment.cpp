// SPDX-License-Identifier: Apache-2.0

#include "ticktack/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>

#include "ticktack/error.hpp"
#include "ticktack/parallel.hpp"

namespace ticktack {

namespace fs = std::filesystem;

const char* to_string(TrainMode m) noexcept { return m == TrainMode::Pt ? "pt" : "ticktack"; }

TrainMode parse_mode(const std::string& s) {
    if (s == "ticktack") return TrainMode::Ticktack;
    if (s == "pt") return TrainMode::Pt;
    throw Error(ErrorCode::InvalidConfig, "mode must be ticktack or pt, got '" + s + "'");
}

TrainingConfig mode_config(TrainingConfig cfg, TrainMode mode) {
    if (mode == TrainMode::Pt) {
        cfg.sigma = 0.0;
        cfg.lambda = 0.0;
        cfg.injection.enabled = false;
    }
    return cfg;
}

Tokenizer build_tokenizer(const std::vector<std::string>& texts, std::span<const SyntheticQaItem> items) {
    std::vector<std::string> all = texts;
    for (const auto& it : items) {
        for (int o = 0; o < 4; ++o) all.push_back(it.filled(o));
    }
    return Tokenizer::build(all);
}

std::vector<AnnotatedSequence> annotate_all(const std::vector<std::string>& texts, const Tokenizer& tokenizer) {
    std::vector<AnnotatedSequence> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(annotate(t, tokenizer));
    return out;
}

InjectionOptions checkpoint_injection(const Checkpoint& ckpt) {
    InjectionOptions inj;
    auto it = ckpt.extra.find("injection");
    inj.enabled = it != ckpt.extra.end() && it->second == "true";
    auto m = ckpt.extra.find("injection_mode");
    if (m != ckpt.extra.end() && m->second == "mentions") inj.mode = InjectionMode::MentionPositions;
    return inj;
}

namespace {

Checkpoint make_checkpoint(const RunConfig& cfg, const ModelConfig& model, ParameterSet params,
                           std::size_t steps, const Tokenizer& tokenizer, const std::string& mode,
                           const InjectionOptions& inj) {
    Checkpoint c;
    c.model = model;
    c.encoding = cfg.encoding();
    c.params = std::move(params);
    c.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed"));
    c.step = steps;
    c.vocabulary = tokenizer.vocabulary();
    c.extra["mode"] = mode;
    c.extra["injection"] = inj.enabled ? "true" : "false";
    c.extra["injection_mode"] = inj.mode == InjectionMode::MentionPositions ? "mentions" : "all";
    return c;
}

void require_fit(const std::vector<AnnotatedSequence>& seqs, const ModelConfig& m) {
    for (const auto& s : seqs) {
        if (s.length() > static_cast<std::size_t>(m.max_seq_len))
            throw Error(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(s.length()) +
                                                        " tokens exceeds model.max_seq_len: " + s.text);
    }
}

}  // namespace

Trained pretrain_base(const RunConfig& cfg, const Tokenizer& tokenizer, const std::vector<std::string>& general_corpus) {
    const auto model = cfg.model(tokenizer.size());
    const auto seqs = annotate_all(general_corpus, tokenizer);
    require_fit(seqs, model);
    const auto tcfg = cfg.pretraining();
    auto r = train(init_parameters(model), seqs, tcfg, model, cfg.encoding(), nullptr);
    Trained t{make_checkpoint(cfg, model, std::move(r.params), r.steps, tokenizer, "base", tcfg.injection),
              std::move(r.metrics), r.failure};
    return t;
}

FisherDiagonal base_fisher(const RunConfig& cfg, const Checkpoint& base, const std::vector<std::string>& corpus) {
    const auto tokenizer = Tokenizer::from_vocabulary(base.vocabulary);
    const auto seqs = annotate_all(corpus, tokenizer);
    const auto n = cfg.get_int("training.fisher_samples");
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "training.fisher_samples must be >= 1");
    return estimate_fisher(base.params, seqs, static_cast<std::size_t>(n), base.model, base.encoding,
                           checkpoint_injection(base), cfg.threads());
}

Trained train_mode(const RunConfig& cfg, TrainMode mode, const Checkpoint& base,
                   const std::vector<std::string>& corpus, const FisherDiagonal* fisher) {
    const auto tokenizer = Tokenizer::from_vocabulary(base.vocabulary);
    const auto seqs = annotate_all(corpus, tokenizer);
    require_fit(seqs, base.model);
    const auto tcfg = mode_config(cfg.training(), mode);
    auto r = train(base.params, seqs, tcfg, base.model, base.encoding, tcfg.lambda > 0.0 ? fisher : nullptr);
    auto ckpt = make_checkpoint(cfg, base.model, std::move(r.params), r.steps, tokenizer, to_string(mode),
                                tcfg.injection);
    ckpt.encoding = base.encoding;
    return {std::move(ckpt), std::move(r.metrics), r.failure};
}

std::vector<GregorianYear> similarity_years(const RunConfig& cfg) {
    const auto lo = static_cast<int>(cfg.get_int("eval.similarity_from"));
    const auto hi = static_cast<int>(cfg.get_int("eval.similarity_to"));
    const auto offset = static_cast<int>(cfg.get_int("eval.partner_offset"));
    if (hi < lo) throw Error(ErrorCode::InvalidRange, "eval.similarity_to < eval.similarity_from");
    std::vector<GregorianYear> years;
    if (offset != 0) {
        for (GregorianYear y(lo);; y = y.successor()) {
            years.push_back(from_astronomical(astronomical(y) - offset));
            if (y.value() >= hi) break;
        }
    }
    for (GregorianYear y(lo);; y = y.successor()) {
        years.push_back(y);
        if (y.value() >= hi) break;
    }
    return years;
}

ModelEvaluation evaluate_model(const RunConfig& cfg, const Checkpoint& ckpt, std::span<const SyntheticQaItem> items,
                               std::span<const SyntheticQaItem> pool, int few_shots) {
    const auto tokenizer = Tokenizer::from_vocabulary(ckpt.vocabulary);
    const auto inj = checkpoint_injection(ckpt);
    const int threads = cfg.threads();
    const auto probe = cfg.get("eval.probe_template");
    ModelEvaluation ev;

    std::set<GregorianYear> distinct;
    for (const auto& it : items) distinct.insert(it.year);
    ev.embedding_years.assign(distinct.begin(), distinct.end());
    const auto at = probe.find("{year}");
    if (at == std::string::npos || probe.find("{year}", at + 1) != std::string::npos)
        throw Error(ErrorCode::InvalidConfig, "eval.probe_template needs exactly one {year}");
    ev.embeddings.resize(ev.embedding_years.size());
    parallel_for(ev.embedding_years.size(), threads, [&](std::size_t i) {
        const auto text = probe.substr(0, at) + format_mention(ev.embedding_years[i]) + probe.substr(at + 6);
        const auto seq = annotate(text, tokenizer);
        ev.embeddings[i] = sentence_embedding(forward(ckpt.params, ckpt.model, seq, ckpt.encoding, inj).hidden);
    });
    std::vector<int> labels;
    for (auto y : ev.embedding_years) labels.push_back(to_cycle_index(y).value());
    ev.clustering = clustering_metrics(ev.embeddings, labels);

    const auto sim_years = similarity_years(cfg);
    ev.similarity = year_similarity_matrix(ckpt.params, ckpt.model, ckpt.encoding, tokenizer, sim_years, probe, inj,
                                           threads);
    ev.contrast = term_contrast(ev.similarity);

    QaOptions qa;
    qa.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed"));
    qa.injection = inj;
    qa.threads = threads;
    qa.shots = 0;
    ev.zero_shot = evaluate_qa(ckpt.params, ckpt.model, ckpt.encoding, tokenizer, items, pool, qa);
    qa.shots = few_shots;
    ev.few_shot = evaluate_qa(ckpt.params, ckpt.model, ckpt.encoding, tokenizer, items, pool, qa);
    return ev;
}

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + p.string() + "'");
    return out;
}

void write_similarity_csv(std::ostream& out, const SimilarityMatrix& m) {
    out << "year";
    for (auto y : m.years) out << ',' << y.value();
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < m.years.size(); ++i) {
        out << m.years[i].value();
        for (std::size_t j = 0; j < m.years.size(); ++j)
            out << ',' << m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out << '\n';
    }
}

void write_model_dir(const fs::path& dir, const RunConfig& cfg, const Trained& t, const ModelEvaluation* ev) {
    fs::create_directories(dir);
    cfg.save((dir / "run_config.ini").string());
    save_container((dir / "checkpoint.bin").string(), to_container(t.checkpoint));
    {
        auto out = open_out(dir / "metrics.csv");
        write_metrics_csv(out, t.metrics);
    }
    if (ev == nullptr) return;
    const std::pair<const char*, const EraReport*> reports[] = {{"report_0shot", &ev->zero_shot},
                                                                {"report_fewshot", &ev->few_shot}};
    for (auto [name, rep] : reports) {
        auto js = open_out(dir / (std::string(name) + ".json"));
        write_report_json(js, *rep);
        auto csv = open_out(dir / (std::string(name) + ".csv"));
        write_report_csv(csv, *rep);
    }
    auto emb = open_out(dir / "embeddings.csv");
    write_embedding_csv(emb, ev->embedding_years, ev->embeddings);
    auto sim = open_out(dir / "similarity.csv");
    write_similarity_csv(sim, ev->similarity);
}

}  // namespace

DeskResult run_desk_experiment(const RunConfig& cfg, const std::string& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    const auto suite = generate_suite(cfg.suite());
    const auto tokenizer = build_tokenizer([&] {
        auto t = suite.general_corpus;
        t.insert(t.end(), suite.train_corpus.begin(), suite.train_corpus.end());
        return t;
    }(), suite.test_items);

    DeskResult r;
    r.base = pretrain_base(cfg, tokenizer, suite.general_corpus);
    if (r.base.failure) throw Error(ErrorCode::NonFiniteLoss, "base pretraining failed: " + *r.base.failure);
    const auto fisher = base_fisher(cfg, r.base.checkpoint, suite.general_corpus);
    r.pt = train_mode(cfg, TrainMode::Pt, r.base.checkpoint, suite.train_corpus, nullptr);
    r.ticktack = train_mode(cfg, TrainMode::Ticktack, r.base.checkpoint, suite.train_corpus, &fisher);
    r.pt_eval = evaluate_model(cfg, r.pt.checkpoint, suite.test_items, suite.exemplar_pool);
    r.ticktack_eval = evaluate_model(cfg, r.ticktack.checkpoint, suite.test_items, suite.exemplar_pool);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!out_dir.empty()) {
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        cfg.save((dir / "run_config.ini").string());
        {
            auto out = open_out(dir / "items.jsonl");
            write_items_jsonl(out, suite.test_items);
            auto ex = open_out(dir / "exemplars.jsonl");
            write_items_jsonl(ex, suite.exemplar_pool);
            auto tr = open_out(dir / "train.jsonl");
            write_corpus_texts(tr, suite.train_corpus);
            auto gen = open_out(dir / "general.jsonl");
            write_corpus_texts(gen, suite.general_corpus);
        }
        save_container((dir / "fisher.bin").string(), to_container(fisher));
        write_model_dir(dir / "base", cfg, r.base, nullptr);
        write_model_dir(dir / "pt", cfg, r.pt, &r.pt_eval);
        write_model_dir(dir / "ticktack", cfg, r.ticktack, &r.ticktack_eval);
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, r);
    }
    return r;
}

void write_summary_csv(std::ostream& out, const DeskResult& r) {
    out << "model,silhouette,intra_mean,inter_mean,same_term_mean,different_term_mean,qa_0shot,qa_fewshot\n";
    out << std::setprecision(17);
    const std::pair<const char*, const ModelEvaluation*> rows[] = {{"pt", &r.pt_eval}, {"ticktack", &r.ticktack_eval}};
    for (auto [name, e] : rows) {
        out << name << ',' << e->clustering.silhouette << ',' << e->clustering.intra_mean << ','
            << e->clustering.inter_mean << ',' << e->contrast.same_term_mean << ','
            << e->contrast.different_term_mean << ',' << e->zero_shot.accuracy() << ','
            << e->few_shot.accuracy() << '\n';
    }
}

}  // namespace ticktack
