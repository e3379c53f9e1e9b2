// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ticktack/eval.hpp"

namespace ticktack {

enum class YearSampling {
    LongTail,     // density grows toward the recent end; every era bucket in range gets an item
    Consecutive,  // year_lo, its successor, ... (n_items years)
};

/// A toy world of traders. What an entity trades in a given year depends only
/// on the entity and the year's sexagenary term, through a seeded table, so
/// years one cycle apart carry the same fact.
class SyntheticWorld {
public:
    SyntheticWorld(std::uint64_t seed, int n_entities);

    [[nodiscard]] int entities() const noexcept { return static_cast<int>(entity_names_.size()); }
    [[nodiscard]] const std::string& entity(int e) const { return entity_names_.at(static_cast<std::size_t>(e)); }
    [[nodiscard]] int fact(int entity, GregorianYear year) const;
    [[nodiscard]] const std::string& object(int o) const { return objects().at(static_cast<std::size_t>(o)); }

    /// "In 606, Aldor traded silk."
    [[nodiscard]] std::string statement(int entity, GregorianYear year) const;

    static const std::vector<std::string>& objects();

private:
    std::vector<std::string> entity_names_;
    std::vector<std::vector<int>> table_;  // [entity][cycle index]
};

struct TaskSpec {
    std::uint64_t seed = 1;
    std::size_t n_items = 200;
    int year_lo = -3000;
    int year_hi = 2025;
    int n_entities = 4;
    YearSampling sampling = YearSampling::LongTail;
    std::uint64_t world_seed = 7;
};

/// Throws Error{InvalidConfig} when n_items is 0 or n_entities is outside
/// [1, 16], and Error{InvalidRange} for an empty or too short year range.
std::vector<SyntheticQaItem> generate_synthetic_tasks(const TaskSpec& spec);

struct SuiteSpec {
    TaskSpec tasks;
    std::size_t exemplar_items = 60;  // held-out few-shot pool
    std::size_t extra_facts = 400;    // training statements beyond the ones the items ask about
    std::size_t general_sentences = 400;
};

struct SyntheticSuite {
    std::vector<SyntheticQaItem> test_items;
    std::vector<SyntheticQaItem> exemplar_pool;
    std::vector<std::string> train_corpus;    // year-fact statements
    std::vector<std::string> general_corpus;  // year-free sentences for the base model
};

/// Test items, a disjoint exemplar pool and the matching corpora. The training
/// corpus states every fact the test and exemplar items ask about, plus
/// `extra_facts` more from the same year distribution, in shuffled order.
SyntheticSuite generate_suite(const SuiteSpec& spec);

}  // namespace ticktack
