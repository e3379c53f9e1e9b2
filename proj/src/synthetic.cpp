// SPDX-License-Identifier: Apache-2.0

#include "ticktack/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ticktack/annotate.hpp"
#include "ticktack/error.hpp"

namespace ticktack {

namespace {

const std::vector<std::string> kEntityNames = {
    "Aldor",  "Brevin", "Corvash", "Delmar", "Eskar", "Fenwick", "Galdor", "Hestor",
    "Ilvane", "Jorund", "Kestrel", "Lomar",  "Morva", "Nereth",  "Orlen",  "Pellam",
};

// Uniform in [0, n); the modulo bias is far below anything measured here.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

GregorianYear uniform_year(std::mt19937_64& rng, int lo, int hi) {
    const int a = astronomical(GregorianYear(lo));
    const int b = astronomical(GregorianYear(hi));
    return from_astronomical(a + static_cast<int>(draw(rng, static_cast<std::size_t>(b - a + 1))));
}

// Skewed toward `hi`: u^4 of the span back from the recent end.
GregorianYear long_tail_year(std::mt19937_64& rng, int lo, int hi) {
    const int a = astronomical(GregorianYear(lo));
    const int b = astronomical(GregorianYear(hi));
    const double u = unit(rng);
    const auto back = static_cast<int>(std::floor(std::pow(u, 4.0) * (b - a + 1)));
    return from_astronomical(std::max(a, b - back));
}

std::vector<GregorianYear> sample_years(std::mt19937_64& rng, std::size_t n, int lo, int hi,
                                        bool cover_buckets) {
    std::vector<GregorianYear> years;
    if (cover_buckets) {
        for (const auto& b : era_buckets()) {
            const int l = std::max(lo, b.lo), h = std::min(hi, b.hi);
            if (l <= h && years.size() < n) years.push_back(uniform_year(rng, l, h));
        }
    }
    while (years.size() < n) years.push_back(long_tail_year(rng, lo, hi));
    shuffle(years, rng);
    return years;
}

SyntheticQaItem make_item(const SyntheticWorld& world, int entity, GregorianYear year, std::mt19937_64& rng) {
    SyntheticQaItem item;
    item.year = year;
    item.bucket = era_bucket_of(year).label;
    item.question = "In " + format_mention(year) + ", " + world.entity(entity) + " traded ____.";
    const int answer = world.fact(entity, year);
    std::vector<int> others;
    for (int o = 0; o < static_cast<int>(SyntheticWorld::objects().size()); ++o) {
        if (o != answer) others.push_back(o);
    }
    shuffle(others, rng);
    item.answer_index = static_cast<int>(draw(rng, 4));
    for (int i = 0, k = 0; i < 4; ++i) {
        item.options[static_cast<std::size_t>(i)] =
            world.object(i == item.answer_index ? answer : others[static_cast<std::size_t>(k++)]);
    }
    return item;
}

void validate(const TaskSpec& spec) {
    if (spec.n_items == 0) throw Error(ErrorCode::InvalidConfig, "n_items must be >= 1");
    if (spec.n_entities < 1 || spec.n_entities > static_cast<int>(kEntityNames.size()))
        throw Error(ErrorCode::InvalidConfig, "n_entities must lie in [1, 16]");
    if (spec.year_hi < spec.year_lo) throw Error(ErrorCode::InvalidRange, "year_hi < year_lo");
    (void)GregorianYear(spec.year_lo);
    (void)GregorianYear(spec.year_hi);
}

}  // namespace

SyntheticWorld::SyntheticWorld(std::uint64_t seed, int n_entities) {
    if (n_entities < 1 || n_entities > static_cast<int>(kEntityNames.size()))
        throw Error(ErrorCode::InvalidConfig, "n_entities must lie in [1, 16]");
    std::mt19937_64 rng(seed);
    entity_names_.assign(kEntityNames.begin(), kEntityNames.begin() + n_entities);
    table_.assign(static_cast<std::size_t>(n_entities), std::vector<int>(CycleIndex::kTerms));
    for (auto& row : table_) {
        for (auto& o : row) o = static_cast<int>(draw(rng, objects().size()));
    }
}

const std::vector<std::string>& SyntheticWorld::objects() {
    static const std::vector<std::string> objs = {
        "salt",  "silk",   "iron",  "tea",    "jade",  "wool",   "copper", "rice",
        "amber", "ivory",  "pepper", "glass", "wine",  "horses", "paper",  "spice",
        "pearls", "cotton", "tin",  "honey",  "furs",  "timber", "grain",  "indigo",
    };
    return objs;
}

int SyntheticWorld::fact(int entity, GregorianYear year) const {
    return table_.at(static_cast<std::size_t>(entity))[static_cast<std::size_t>(to_cycle_index(year).value())];
}

std::string SyntheticWorld::statement(int entity, GregorianYear year) const {
    return "In " + format_mention(year) + ", " + this->entity(entity) + " traded " + object(fact(entity, year)) + ".";
}

std::vector<SyntheticQaItem> generate_synthetic_tasks(const TaskSpec& spec) {
    validate(spec);
    const SyntheticWorld world(spec.world_seed, spec.n_entities);
    std::mt19937_64 rng(spec.seed);
    std::vector<GregorianYear> years;
    if (spec.sampling == YearSampling::Consecutive) {
        GregorianYear y(spec.year_lo);
        for (std::size_t i = 0; i < spec.n_items; ++i) {
            if (y.value() > spec.year_hi) throw Error(ErrorCode::InvalidRange, "year range shorter than n_items");
            years.push_back(y);
            if (i + 1 < spec.n_items) y = y.successor();
        }
    } else {
        years = sample_years(rng, spec.n_items, spec.year_lo, spec.year_hi, true);
    }
    std::vector<SyntheticQaItem> items;
    items.reserve(years.size());
    for (auto y : years) {
        const int e = static_cast<int>(draw(rng, static_cast<std::size_t>(spec.n_entities)));
        items.push_back(make_item(world, e, y, rng));
    }
    return items;
}

SyntheticSuite generate_suite(const SuiteSpec& spec) {
    SyntheticSuite s;
    s.test_items = generate_synthetic_tasks(spec.tasks);
    const SyntheticWorld world(spec.tasks.world_seed, spec.tasks.n_entities);

    if (spec.exemplar_items > 0) {
        TaskSpec pool = spec.tasks;
        pool.seed = spec.tasks.seed * 0x9E3779B97F4A7C15ull + 1;
        pool.n_items = spec.exemplar_items;
        pool.sampling = YearSampling::LongTail;
        s.exemplar_pool = generate_synthetic_tasks(pool);
    }

    std::mt19937_64 rng(spec.tasks.seed * 0x9E3779B97F4A7C15ull + 2);
    auto state = [&](const SyntheticQaItem& it) { s.train_corpus.push_back(it.filled(it.answer_index)); };
    for (const auto& it : s.test_items) state(it);
    for (const auto& it : s.exemplar_pool) state(it);
    for (auto y : sample_years(rng, spec.extra_facts, spec.tasks.year_lo, spec.tasks.year_hi, false)) {
        const int e = static_cast<int>(draw(rng, static_cast<std::size_t>(spec.tasks.n_entities)));
        s.train_corpus.push_back(world.statement(e, y));
    }
    shuffle(s.train_corpus, rng);

    const auto& objs = SyntheticWorld::objects();
    for (std::size_t i = 0; i < spec.general_sentences; ++i) {
        const auto& who = world.entity(static_cast<int>(draw(rng, static_cast<std::size_t>(world.entities()))));
        const auto& a = objs[draw(rng, objs.size())];
        const auto& b = objs[draw(rng, objs.size())];
        switch (draw(rng, 3)) {
            case 0: s.general_corpus.push_back(who + " traded " + a + "."); break;
            case 1: s.general_corpus.push_back(who + " traded " + a + " and " + b + "."); break;
            default: s.general_corpus.push_back("Later, " + who + " traded " + a + "."); break;
        }
    }
    return s;
}

}  // namespace ticktack
