// SPDX-License-Identifier: Apache-2.0

#include "ticktack/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ticktack/error.hpp"

namespace ticktack {

namespace {

using K = ValueKind;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

const ConfigKey* find_key(const std::string& name) {
    const auto& schema = config_schema();
    auto it = std::find_if(schema.begin(), schema.end(), [&](const ConfigKey& k) { return k.name == name; });
    return it == schema.end() ? nullptr : &*it;
}

bool parse_int(const std::string& s, long long& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
    // from_chars for double is missing on older libstdc++
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    is >> out;
    return !s.empty() && !is.fail() && is.eof();
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
    return false;
}

void check_value(const ConfigKey& key, const std::string& v) {
    long long i;
    double d;
    bool b;
    bool ok = true;
    switch (key.kind) {
        case K::Integer: ok = parse_int(v, i); break;
        case K::Real: ok = parse_real(v, d); break;
        case K::Boolean: ok = parse_bool(v, b); break;
        case K::Choice: ok = std::find(key.choices.begin(), key.choices.end(), v) != key.choices.end(); break;
        case K::Text: break;
    }
    if (!ok) throw Error(ErrorCode::InvalidConfig, key.name + ": invalid value '" + v + "'");
}

int narrow(long long v, const std::string& name) {
    if (v < -2147483647LL || v > 2147483647LL) throw Error(ErrorCode::InvalidConfig, name + ": out of range");
    return static_cast<int>(v);
}

}  // namespace

const char* to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::Default: return "default";
        case Provenance::File: return "file";
        case Provenance::Env: return "env";
        case Provenance::Flag: return "flag";
    }
    return "?";
}

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"run.seed", K::Integer, "1", "seed for initialization, shuffling and exemplar draws", {}},
        {"run.threads", K::Integer, "1", "worker cap; 1 gives reference runs", {}},

        {"model.dim", K::Integer, "32", "hidden width d (also the encoding width)", {}},
        {"model.n_layers", K::Integer, "2", "transformer blocks", {}},
        {"model.n_heads", K::Integer, "4", "attention heads; must divide dim", {}},
        {"model.max_seq_len", K::Integer, "96", "longest sequence in tokens", {}},
        {"model.adapter_rank", K::Integer, "0", "0 trains all weights, r > 0 trains rank-r adapters only", {}},

        {"encoding.alpha", K::Real, "1.0", "radius offset", {}},
        {"encoding.beta", K::Real, "0.5", "radius growth per 60-year cycle", {}},
        {"encoding.base", K::Real, "10000", "frequency base of the sinusoidal encoding", {}},

        {"training.delta", K::Real, "0.5", "weight of the intra-class term against the inter-class term", {}},
        {"training.sigma", K::Real, "1.0", "weight of the temporal objective", {}},
        {"training.lambda", K::Real, "100", "EWC strength", {}},
        {"training.optimizer", K::Choice, "sgd", "update rule", {"sgd", "adam"}},
        {"training.learning_rate", K::Real, "1e-4", "step size", {}},
        {"training.batch_size", K::Integer, "8", "sequences per micro-batch", {}},
        {"training.grad_accum_steps", K::Integer, "2", "micro-batches per update", {}},
        {"training.epochs", K::Integer, "10", "passes over the corpus", {}},
        {"training.max_steps", K::Integer, "0", "stop after this many updates (0: no limit)", {}},
        {"training.injection", K::Boolean, "true", "add the temporal encoding of the first year mention", {}},
        {"training.injection_mode", K::Choice, "all", "rows receiving the encoding", {"all", "mentions"}},
        {"training.fisher_samples", K::Integer, "64", "sequences used for the Fisher estimate", {}},

        {"pretrain.learning_rate", K::Real, "1e-4", "step size for the base model (same update rule)", {}},
        {"pretrain.epochs", K::Integer, "10", "passes over the general corpus", {}},

        {"eval.shots", K::Integer, "0", "exemplars prepended to each question", {}},
        {"eval.probe_template", K::Text, "In {year}, Aldor traded", "probe text for year similarity", {}},
        {"eval.similarity_from", K::Integer, "2010", "first year of the similarity matrix", {}},
        {"eval.similarity_to", K::Integer, "2025", "last year of the similarity matrix", {}},
        {"eval.partner_offset", K::Integer, "60",
         "also probe each similarity year minus this offset (0 disables)", {}},

        {"tasks.seed", K::Integer, "1", "item sampling seed", {}},
        {"tasks.world_seed", K::Integer, "7", "seed of the fact table", {}},
        {"tasks.n_items", K::Integer, "200", "test questions", {}},
        {"tasks.year_lo", K::Integer, "-3000", "earliest year (negative is BCE)", {}},
        {"tasks.year_hi", K::Integer, "2025", "latest year", {}},
        {"tasks.n_entities", K::Integer, "4", "traders in the world (1-16)", {}},
        {"tasks.sampling", K::Choice, "long-tail", "year distribution", {"long-tail", "consecutive"}},
        {"tasks.exemplar_items", K::Integer, "60", "few-shot exemplar pool size", {}},
        {"tasks.extra_facts", K::Integer, "400", "training statements beyond the asked facts", {}},
        {"tasks.general_sentences", K::Integer, "400", "year-free sentences for the base model", {}},

        {"paths.out", K::Text, "out", "output root (TICKTACK_OUT overrides)", {}},
        {"paths.corpus", K::Text, "", "training corpus (JSONL)", {}},
        {"paths.general_corpus", K::Text, "", "year-free corpus for the base model and Fisher (JSONL)", {}},
        {"paths.items", K::Text, "", "QA items (JSONL)", {}},
        {"paths.exemplars", K::Text, "", "few-shot exemplar pool (JSONL)", {}},
        {"paths.base_checkpoint", K::Text, "", "base model theta_G", {}},
        {"paths.fisher", K::Text, "", "Fisher diagonal of the base model", {}},
        {"paths.checkpoint", K::Text, "", "model to evaluate", {}},
    };
    return schema;
}

RunConfig::RunConfig() {
    for (const auto& k : config_schema()) values_[k.name] = {k.default_value, Provenance::Default};
}

void RunConfig::set(const std::string& name, const std::string& value, Provenance source) {
    const auto* key = find_key(name);
    if (key == nullptr) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + name + "'");
    check_value(*key, value);
    auto& e = values_[name];
    // a weaker source arriving later never undoes a stronger one
    if (static_cast<int>(source) < static_cast<int>(e.source)) return;
    e = {value, source};
}

void RunConfig::merge_file(std::istream& in, const std::string& origin) {
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw Error(ErrorCode::InvalidConfig, where() + "unterminated section header");
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, where() + "expected key = value");
        std::string key = trim(std::string_view(s).substr(0, eq));
        std::string value(std::string_view(s).substr(eq + 1));
        for (std::size_t c = value.find('#'); c != std::string::npos; c = value.find('#', c + 1)) {
            if (c > 0 && (value[c - 1] == ' ' || value[c - 1] == '\t')) {
                value.resize(c);
                break;
            }
        }
        value = trim(value);
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string name = section.empty() ? key : section + "." + key;
        try {
            set(name, value, Provenance::File);
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, where() + e.what());
        }
    }
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config '" + path + "'");
    merge_file(in, path);
}

const std::string& RunConfig::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + name + "'");
    return it->second.value;
}

long long RunConfig::get_int(const std::string& name) const {
    long long v = 0;
    if (!parse_int(get(name), v)) throw Error(ErrorCode::InvalidConfig, name + ": not an integer");
    return v;
}

double RunConfig::get_real(const std::string& name) const {
    double v = 0;
    if (!parse_real(get(name), v)) throw Error(ErrorCode::InvalidConfig, name + ": not a number");
    return v;
}

bool RunConfig::get_bool(const std::string& name) const {
    bool v = false;
    if (!parse_bool(get(name), v)) throw Error(ErrorCode::InvalidConfig, name + ": not a boolean");
    return v;
}

Provenance RunConfig::provenance(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + name + "'");
    return it->second.source;
}

void RunConfig::write(std::ostream& out) const {
    std::string section;
    for (const auto& k : config_schema()) {
        const auto dot = k.name.find('.');
        const auto sec = k.name.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        const auto& e = values_.at(k.name);
        out << k.name.substr(dot + 1) << " = " << e.value << "  # " << to_string(e.source) << '\n';
    }
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
    write(out);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

ModelConfig RunConfig::model(int vocab_size) const {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.dim = narrow(get_int("model.dim"), "model.dim");
    m.n_layers = narrow(get_int("model.n_layers"), "model.n_layers");
    m.n_heads = narrow(get_int("model.n_heads"), "model.n_heads");
    m.max_seq_len = narrow(get_int("model.max_seq_len"), "model.max_seq_len");
    m.adapter_rank = narrow(get_int("model.adapter_rank"), "model.adapter_rank");
    m.seed = static_cast<std::uint64_t>(get_int("run.seed"));
    m.validate();
    return m;
}

EncodingConfig RunConfig::encoding() const {
    EncodingConfig e;
    e.alpha = get_real("encoding.alpha");
    e.beta = get_real("encoding.beta");
    e.wavelength_base = get_real("encoding.base");
    e.dim = narrow(get_int("model.dim"), "model.dim");
    e.validate();
    return e;
}

TrainingConfig RunConfig::training() const {
    TrainingConfig t;
    t.delta = get_real("training.delta");
    t.sigma = get_real("training.sigma");
    t.lambda = get_real("training.lambda");
    t.learning_rate = get_real("training.learning_rate");
    t.optimizer = get("training.optimizer") == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    t.batch_size = narrow(get_int("training.batch_size"), "training.batch_size");
    t.grad_accum_steps = narrow(get_int("training.grad_accum_steps"), "training.grad_accum_steps");
    t.epochs = narrow(get_int("training.epochs"), "training.epochs");
    const auto steps = get_int("training.max_steps");
    if (steps < 0) throw Error(ErrorCode::InvalidConfig, "training.max_steps must be >= 0");
    t.max_steps = static_cast<std::size_t>(steps);
    t.seed = static_cast<std::uint64_t>(get_int("run.seed"));
    t.injection.enabled = get_bool("training.injection");
    t.injection.mode = get("training.injection_mode") == "mentions" ? InjectionMode::MentionPositions
                                                                     : InjectionMode::AllPositions;
    t.validate();
    return t;
}

TrainingConfig RunConfig::pretraining() const {
    TrainingConfig t = training();
    t.sigma = 0.0;
    t.lambda = 0.0;
    t.max_steps = 0;
    t.injection.enabled = false;
    t.learning_rate = get_real("pretrain.learning_rate");
    t.epochs = narrow(get_int("pretrain.epochs"), "pretrain.epochs");
    t.validate();
    return t;
}

SuiteSpec RunConfig::suite() const {
    SuiteSpec s;
    auto count = [&](const char* name) {
        const auto v = get_int(name);
        if (v < 0) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be >= 0");
        return static_cast<std::size_t>(v);
    };
    s.tasks.seed = static_cast<std::uint64_t>(get_int("tasks.seed"));
    s.tasks.world_seed = static_cast<std::uint64_t>(get_int("tasks.world_seed"));
    s.tasks.n_items = count("tasks.n_items");
    s.tasks.year_lo = narrow(get_int("tasks.year_lo"), "tasks.year_lo");
    s.tasks.year_hi = narrow(get_int("tasks.year_hi"), "tasks.year_hi");
    s.tasks.n_entities = narrow(get_int("tasks.n_entities"), "tasks.n_entities");
    s.tasks.sampling = get("tasks.sampling") == "consecutive" ? YearSampling::Consecutive : YearSampling::LongTail;
    s.exemplar_items = count("tasks.exemplar_items");
    s.extra_facts = count("tasks.extra_facts");
    s.general_sentences = count("tasks.general_sentences");
    return s;
}

int RunConfig::threads() const {
    const auto t = get_int("run.threads");
    if (t < 1) throw Error(ErrorCode::InvalidConfig, "run.threads must be >= 1");
    return narrow(t, "run.threads");
}

std::string RunConfig::help_text() {
    std::ostringstream os;
    os << "Config keys ([section] key = value; flags override the file, the file overrides defaults):\n";
    for (const auto& k : config_schema()) {
        os << "  " << k.name << " (default: " << (k.default_value.empty() ? "\"\"" : k.default_value) << ")\n      "
           << k.help;
        if (!k.choices.empty()) {
            os << " [";
            for (std::size_t i = 0; i < k.choices.size(); ++i) os << (i ? "|" : "") << k.choices[i];
            os << ']';
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace ticktack
