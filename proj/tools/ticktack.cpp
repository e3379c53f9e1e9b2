// SPDX-License-Identifier: Apache-2.0
//
// ticktack: calendar conversion, corpus profiling, training and evaluation.
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>

#include "ticktack/annotate.hpp"
#include "ticktack/checkpoint.hpp"
#include "ticktack/error.hpp"
#include "ticktack/eval.hpp"
#include "ticktack/experiment.hpp"
#include "ticktack/run_config.hpp"
#include "ticktack/synthetic.hpp"
#include "ticktack/temporal_geometry.hpp"

namespace fs = std::filesystem;
using namespace ticktack;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    int threads = 0;
    long long seed = 0;
    bool seed_given = false;
    std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "INI config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.sets, "override a config key, e.g. --set training.sigma=0.5")->take_all();
    cmd->add_option("--threads", c.threads, "worker cap (run.threads); 1 for reference runs")
        ->check(CLI::PositiveNumber);
    cmd->add_option_function<long long>("--seed", [&c](long long s) {
        c.seed = s;
        c.seed_given = true;
    }, "run.seed");
    cmd->add_option("-o,--out-dir", c.out_dir, "output directory (default: <paths.out>/<command>)");
    cmd->footer(RunConfig::help_text());
}

RunConfig resolve(const Common& c) {
    RunConfig cfg;
    if (!c.config_path.empty()) cfg.load_file(c.config_path);
    if (const char* env = std::getenv("TICKTACK_OUT"); env != nullptr && *env != '\0')
        cfg.set("paths.out", env, Provenance::Env);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1), Provenance::Flag);
    }
    if (c.threads > 0) cfg.set("run.threads", std::to_string(c.threads), Provenance::Flag);
    if (c.seed_given) cfg.set("run.seed", std::to_string(c.seed), Provenance::Flag);
    return cfg;
}

fs::path output_dir(const Common& c, const RunConfig& cfg, const std::string& name) {
    fs::path dir = c.out_dir.empty() ? fs::path(cfg.get("paths.out")) / name : fs::path(c.out_dir);
    fs::create_directories(dir);
    cfg.save((dir / "run_config.ini").string());
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + p.string() + "'");
    return out;
}

const std::string& require_path(const RunConfig& cfg, const std::string& key) {
    const auto& p = cfg.get(key);
    if (p.empty()) throw Error(ErrorCode::InvalidConfig, key + " is required");
    if (!fs::exists(p)) throw Error(ErrorCode::IoFailure, key + ": no such file '" + p + "'");
    return p;
}

std::vector<SyntheticQaItem> load_items(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
    return read_items_jsonl(in);
}

// ---- convert / encode ----

std::vector<GregorianYear> collect_years(const std::vector<std::string>& args, const std::vector<std::string>& range) {
    std::vector<GregorianYear> years;
    for (const auto& a : args) years.push_back(parse_year(a));
    if (!range.empty()) {
        const auto lo = parse_year(range.at(0)), hi = parse_year(range.at(1));
        if (hi < lo) throw Error(ErrorCode::InvalidRange, "range end precedes its start");
        for (auto y = lo;; y = y.successor()) {
            years.push_back(y);
            if (y == hi) break;
        }
    }
    if (years.empty()) throw Error(ErrorCode::InvalidConfig, "give at least one year or --range");
    return years;
}

void cmd_convert(const RunConfig& cfg, const std::vector<GregorianYear>& years) {
    const auto enc = cfg.encoding();
    std::cout << "year\tcycle_index\tterm\ttheta_deg\tr\tx\ty\n" << std::setprecision(12);
    for (auto y : years) {
        const auto ci = to_cycle_index(y);
        const auto p = to_polar(y, enc);
        const auto xy = to_cartesian(p);
        std::cout << format_year(y) << '\t' << ci.value() << '\t' << term_of(ci).name << '\t' << p.theta_degrees
                  << '\t' << p.radius << '\t' << xy.x << '\t' << xy.y << '\n';
    }
}

void cmd_encode(const RunConfig& cfg, const std::vector<GregorianYear>& years) {
    const auto enc = cfg.encoding();
    std::cout << std::setprecision(17);
    for (auto y : years) {
        const auto e = encode_year<double>(y, enc);
        for (const auto& [part, v] : {std::pair{"x", &e.te_x}, std::pair{"y", &e.te_y}}) {
            std::cout << y.value() << ',' << part;
            for (Eigen::Index i = 0; i < v->size(); ++i) std::cout << ',' << (*v)(i);
            std::cout << '\n';
        }
    }
}

// ---- profile ----

void cmd_profile(const Common& c, const RunConfig& cfg, const std::string& corpus, long long bin_width,
                 const std::string& view) {
    std::ifstream in(corpus);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open corpus '" + corpus + "'");
    if (bin_width < 1) throw Error(ErrorCode::InvalidConfig, "--bin-width must be >= 1");
    const auto profile = profile_corpus(in);
    const auto h = view == "sexagenary" ? profile.sexagenary() : profile.gregorian(bin_width);
    nlohmann::json summary;
    summary["view"] = view;
    summary["bin_width"] = view == "sexagenary" ? 1 : bin_width;
    summary["total"] = h.total;
    summary["bins"] = h.bins.size();
    try {
        const auto m = uniformity_metrics(h);
        summary["entropy"] = m.normalized_entropy;
        summary["chi_square"] = m.chi_square;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyHistogram) throw;
        std::cerr << "warning: " << e.what() << '\n';
        summary["entropy"] = nullptr;
        summary["chi_square"] = nullptr;
    }
    const auto dir = output_dir(c, cfg, "profile");
    auto csv = open_out(dir / "histogram.csv");
    write_histogram_csv(csv, h);
    auto js = open_out(dir / "summary.json");
    js << summary.dump(2) << '\n';
    std::cout << dir.string() << '\n';
}

// ---- synthetic suite and training ----

void cmd_gen_tasks(const Common& c, const RunConfig& cfg) {
    const auto suite = generate_suite(cfg.suite());
    const auto dir = output_dir(c, cfg, "tasks");
    auto items = open_out(dir / "items.jsonl");
    write_items_jsonl(items, suite.test_items);
    auto ex = open_out(dir / "exemplars.jsonl");
    write_items_jsonl(ex, suite.exemplar_pool);
    auto train = open_out(dir / "train.jsonl");
    write_corpus_texts(train, suite.train_corpus);
    auto general = open_out(dir / "general.jsonl");
    write_corpus_texts(general, suite.general_corpus);
    std::cout << dir.string() << '\n';
}

void write_trained(const fs::path& dir, const Trained& t) {
    save_container((dir / "checkpoint.bin").string(), to_container(t.checkpoint));
    auto m = open_out(dir / "metrics.csv");
    write_metrics_csv(m, t.metrics);
}

int report_failure(const Trained& t) {
    if (!t.failure) return 0;
    std::cerr << "error: training stopped: " << *t.failure << '\n';
    return 1;
}

int cmd_pretrain(const Common& c, const RunConfig& cfg) {
    const auto general = read_corpus_texts(require_path(cfg, "paths.general_corpus"));
    std::vector<std::string> vocab_texts = general;
    if (!cfg.get("paths.corpus").empty()) {
        const auto corpus = read_corpus_texts(require_path(cfg, "paths.corpus"));
        vocab_texts.insert(vocab_texts.end(), corpus.begin(), corpus.end());
    }
    std::vector<SyntheticQaItem> items;
    if (!cfg.get("paths.items").empty()) items = load_items(require_path(cfg, "paths.items"));
    const auto tokenizer = build_tokenizer(vocab_texts, items);
    const auto t = pretrain_base(cfg, tokenizer, general);
    const auto dir = output_dir(c, cfg, "pretrain");
    write_trained(dir, t);
    std::cout << dir.string() << '\n';
    return report_failure(t);
}

void cmd_fisher(const Common& c, const RunConfig& cfg) {
    const auto base = checkpoint_from(load_container(require_path(cfg, "paths.base_checkpoint")));
    const auto general = read_corpus_texts(require_path(cfg, "paths.general_corpus"));
    const auto fisher = base_fisher(cfg, base, general);
    const auto dir = output_dir(c, cfg, "fisher");
    save_container((dir / "fisher.bin").string(), to_container(fisher));
    std::cout << dir.string() << '\n';
}

int cmd_train(const Common& c, const RunConfig& cfg, TrainMode mode) {
    const auto base = checkpoint_from(load_container(require_path(cfg, "paths.base_checkpoint")));
    const auto corpus = read_corpus_texts(require_path(cfg, "paths.corpus"));
    std::optional<FisherDiagonal> fisher;
    if (mode_config(cfg.training(), mode).lambda > 0.0) {
        if (cfg.get("paths.fisher").empty())
            throw Error(ErrorCode::InvalidConfig, "paths.fisher is required when training.lambda > 0");
        fisher = fisher_from(load_container(require_path(cfg, "paths.fisher")));
    }
    const auto t = train_mode(cfg, mode, base, corpus, fisher ? &*fisher : nullptr);
    const auto dir = output_dir(c, cfg, std::string("train-") + to_string(mode));
    write_trained(dir, t);
    std::cout << dir.string() << '\n';
    return report_failure(t);
}

void cmd_eval(const Common& c, const RunConfig& cfg) {
    const auto ckpt = checkpoint_from(load_container(require_path(cfg, "paths.checkpoint")));
    const auto items = load_items(require_path(cfg, "paths.items"));
    if (items.empty()) throw Error(ErrorCode::InsufficientData, "items file is empty");
    const auto shots = static_cast<int>(cfg.get_int("eval.shots"));
    std::vector<SyntheticQaItem> pool;
    if (shots > 0) pool = load_items(require_path(cfg, "paths.exemplars"));

    const auto tokenizer = Tokenizer::from_vocabulary(ckpt.vocabulary);
    QaOptions qa;
    qa.shots = shots;
    qa.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed"));
    qa.injection = checkpoint_injection(ckpt);
    qa.threads = cfg.threads();
    const auto report = evaluate_qa(ckpt.params, ckpt.model, ckpt.encoding, tokenizer, items, pool, qa);
    const auto ev = evaluate_model(cfg, ckpt, items, pool, 0);

    const auto dir = output_dir(c, cfg, "eval-" + std::to_string(shots) + "shot");
    auto js = open_out(dir / "report.json");
    write_report_json(js, report);
    auto csv = open_out(dir / "report.csv");
    write_report_csv(csv, report);
    auto emb = open_out(dir / "embeddings.csv");
    write_embedding_csv(emb, ev.embedding_years, ev.embeddings);
    nlohmann::json cl;
    cl["silhouette"] = ev.clustering.silhouette;
    cl["intra_mean"] = ev.clustering.intra_mean;
    cl["inter_mean"] = ev.clustering.inter_mean;
    cl["same_term_mean"] = ev.contrast.same_term_mean;
    cl["different_term_mean"] = ev.contrast.different_term_mean;
    auto cj = open_out(dir / "clustering.json");
    cj << cl.dump(2) << '\n';
    std::cout << dir.string() << '\n' << "accuracy " << report.accuracy() << '\n';
}

void cmd_experiment(const Common& c, const RunConfig& cfg) {
    const fs::path dir = c.out_dir.empty() ? fs::path(cfg.get("paths.out")) / "experiment" : fs::path(c.out_dir);
    const auto r = run_desk_experiment(cfg, dir.string());
    write_summary_csv(std::cout, r);
    std::cout << "seconds " << r.seconds << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ticktack: sexagenary temporal encoding, alignment training and evaluation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    app.footer("Environment: TICKTACK_OUT overrides paths.out (a --set or --out-dir flag still wins).\n"
               "Exit codes: 0 success, 2 usage or config error, 1 runtime error.\n\n" +
               RunConfig::help_text());

    Common common;
    std::vector<std::string> year_args, range;
    std::string corpus, view = "gregorian", mode = "ticktack";
    long long bin_width = 200;
    int shots = -1;

    auto* convert = app.add_subcommand("convert", "years to cycle index, term, angle, radius and x/y");
    convert->add_option("years", year_args, "years such as 606, -75000, 75000BCE");
    convert->add_option("--range", range, "every year from LO to HI")->expected(2);
    add_common(convert, common);

    auto* encode = app.add_subcommand("encode", "temporal encoding vectors (CSV: year,x|y,values)");
    encode->add_option("years", year_args, "years");
    encode->add_option("--range", range, "every year from LO to HI")->expected(2);
    add_common(encode, common);

    auto* profile = app.add_subcommand("profile", "year-mention histogram of a JSONL corpus");
    profile->add_option("corpus", corpus, "corpus file")->required();
    profile->add_option("--bin-width", bin_width, "Gregorian bin width in years")->capture_default_str();
    profile->add_option("--view", view, "gregorian or sexagenary")
        ->check(CLI::IsMember({"gregorian", "sexagenary"}))
        ->capture_default_str();
    add_common(profile, common);

    auto* gen = app.add_subcommand("gen-tasks", "synthetic QA items, exemplar pool and corpora");
    add_common(gen, common);
    auto* pre = app.add_subcommand("pretrain", "next-token pretraining of the base model");
    add_common(pre, common);
    auto* fisher = app.add_subcommand("fisher", "diagonal Fisher of the base model");
    add_common(fisher, common);
    auto* train = app.add_subcommand("train", "fine-tune from the base model");
    train->add_option("--mode", mode, "ticktack (full objective) or pt (next-token only)")
        ->check(CLI::IsMember({"ticktack", "pt"}))
        ->capture_default_str();
    add_common(train, common);
    auto* eval = app.add_subcommand("eval", "QA accuracy by era, clustering and embedding export");
    eval->add_option("--shots", shots, "exemplars per prompt (eval.shots)");
    add_common(eval, common);
    auto* experiment = app.add_subcommand("experiment", "the whole pipeline for both modes, end to end");
    add_common(experiment, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto cfg = resolve(common);
        if (shots >= 0) cfg.set("eval.shots", std::to_string(shots), Provenance::Flag);
        if (convert->parsed()) cmd_convert(cfg, collect_years(year_args, range));
        else if (encode->parsed()) cmd_encode(cfg, collect_years(year_args, range));
        else if (profile->parsed()) cmd_profile(common, cfg, corpus, bin_width, view);
        else if (gen->parsed()) cmd_gen_tasks(common, cfg);
        else if (pre->parsed()) return cmd_pretrain(common, cfg);
        else if (fisher->parsed()) cmd_fisher(common, cfg);
        else if (train->parsed()) return cmd_train(common, cfg, parse_mode(mode));
        else if (eval->parsed()) cmd_eval(common, cfg);
        else if (experiment->parsed()) cmd_experiment(common, cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
