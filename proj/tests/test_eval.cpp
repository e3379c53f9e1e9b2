// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "ticktack/error.hpp"
#include "ticktack/eval.hpp"
#include "ticktack/experiment.hpp"
#include "ticktack/synthetic.hpp"

using namespace ticktack;

namespace {

Eigen::RowVectorXd row(std::initializer_list<double> v) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) r(i++) = x;
    return r;
}

// textbook silhouette with cosine distance, singletons scoring 0
double silhouette_oracle(const std::vector<Eigen::RowVectorXd>& x, const std::vector<int>& y) {
    auto dist = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
        return 1.0 - a.dot(b) / (a.norm() * b.norm());
    };
    const std::set<int> classes(y.begin(), y.end());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::map<int, std::pair<double, int>> acc;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (i == j) continue;
            acc[y[j]].first += dist(x[i], x[j]);
            acc[y[j]].second += 1;
        }
        if (acc[y[i]].second == 0) continue;
        const double a = acc[y[i]].first / acc[y[i]].second;
        double b = 1e300;
        for (int c : classes) {
            if (c != y[i]) b = std::min(b, acc[c].first / acc[c].second);
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(x.size());
}

int code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return static_cast<int>(e.code());
    }
    return -1;
}

struct TinyModel {
    Tokenizer tok;
    ModelConfig cfg;
    EncodingConfig enc;
    ParameterSet params;
};

TinyModel tiny_model(const std::vector<std::string>& texts, std::span<const SyntheticQaItem> items = {}) {
    TinyModel m;
    m.tok = build_tokenizer(texts, items);
    m.cfg.vocab_size = m.tok.size();
    m.cfg.dim = 8;
    m.cfg.n_layers = 1;
    m.cfg.n_heads = 2;
    m.cfg.max_seq_len = 48;
    m.cfg.seed = 4;
    m.enc.dim = 8;
    m.params = init_parameters(m.cfg);
    return m;
}

}  // namespace

TEST_CASE("similarity matrix") {
    auto m = tiny_model({"In 2010, Aldor traded salt."});
    std::vector<GregorianYear> years;
    for (int y = 2010; y <= 2025; ++y) years.emplace_back(y);
    const auto s = year_similarity_matrix(m.params, m.cfg, m.enc, m.tok, years, "In {year}, Aldor traded",
                                          InjectionOptions{});
    REQUIRE(s.values.rows() == 16);
    CHECK(s.values.allFinite());
    for (Eigen::Index i = 0; i < 16; ++i) {
        CHECK(std::abs(s.values(i, i) - 1.0) < 1e-9);
        for (Eigen::Index j = 0; j < 16; ++j) {
            CHECK(std::abs(s.values(i, j) - s.values(j, i)) < 1e-9);
            CHECK(s.values(i, j) <= 1.0 + 1e-12);
            CHECK(s.values(i, j) >= -1.0 - 1e-12);
        }
    }

    const std::vector<GregorianYear> repeat = {GregorianYear{2010}, GregorianYear{-75}, GregorianYear{2010}};
    const auto r = year_similarity_matrix(m.params, m.cfg, m.enc, m.tok, repeat, "In {year}, Aldor traded",
                                          InjectionOptions{}, 2);
    CHECK(std::abs(r.values(0, 2) - 1.0) < 1e-12);

    const auto bad = static_cast<int>(ErrorCode::InvalidConfig);
    CHECK(code_of([&] { (void)year_similarity_matrix(m.params, m.cfg, m.enc, m.tok, years, "Aldor", {}); }) == bad);
    CHECK(code_of([&] {
              (void)year_similarity_matrix(m.params, m.cfg, m.enc, m.tok, years, "{year} {year}", {});
          }) == bad);
}

TEST_CASE("term contrast") {
    // 1965 and 2025 share a term; 1966 does not
    SimilarityMatrix m;
    m.years = {GregorianYear{1965}, GregorianYear{1966}, GregorianYear{2025}};
    m.values.resize(3, 3);
    m.values << 1.0, 0.2, 0.9, 0.2, 1.0, 0.4, 0.9, 0.4, 1.0;
    const auto c = term_contrast(m);
    CHECK(c.same_term_mean == doctest::Approx(0.9));
    CHECK(c.different_term_mean == doctest::Approx(0.3));
    // ordered pairs
    CHECK(c.same_term_pairs == 2);
    CHECK(c.different_term_pairs == 4);

    const std::vector<Eigen::RowVectorXd> e = {row({1, 0}), row({1, 1}), row({0, 2})};
    const auto s = similarity_from_embeddings(m.years, e);
    CHECK(s.values(0, 2) == 0.0);
    CHECK(s.values(0, 1) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("silhouette") {
    SUBCASE("perfect separation") {
        const std::vector<Eigen::RowVectorXd> x = {row({1, 0}), row({2, 0}), row({0, 1}), row({0, 3})};
        const auto c = clustering_metrics(x, std::vector<int>{1, 1, 2, 2});
        CHECK(c.silhouette == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(c.intra_mean == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(c.inter_mean == doctest::Approx(0.0));
    }
    SUBCASE("hand value") {
        // each point: a = 1 (its orthogonal classmate), b = (2 + 1) / 2, s = 1/3
        const std::vector<Eigen::RowVectorXd> x = {row({1, 0}), row({0, 1}), row({-1, 0}), row({0, -1})};
        CHECK(clustering_metrics(x, std::vector<int>{5, 5, 9, 9}).silhouette ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    SUBCASE("six vectors against the oracle") {
        const std::vector<Eigen::RowVectorXd> x = {row({1, 0.2, 0}), row({0.9, 0.1, 0.3}), row({0.2, 1, 0}),
                                                   row({0.1, 0.8, 0.5}), row({0, 0.2, 1}), row({0.4, 0.4, 0.4})};
        const std::vector<int> y = {0, 0, 1, 1, 2, 2};
        CHECK(clustering_metrics(x, y).silhouette == doctest::Approx(silhouette_oracle(x, y)).epsilon(1e-13));
        const std::vector<int> single = {0, 0, 1, 1, 1, 2};
        CHECK(clustering_metrics(x, single).silhouette ==
              doctest::Approx(silhouette_oracle(x, single)).epsilon(1e-13));
    }
    SUBCASE("mislabeling flips the sign") {
        const std::vector<Eigen::RowVectorXd> x = {row({1, 0}), row({1, 0.1}), row({-1, 0}), row({-1, 0.1})};
        CHECK(clustering_metrics(x, std::vector<int>{1, 1, 2, 2}).silhouette > 0.9);
        CHECK(clustering_metrics(x, std::vector<int>{1, 2, 1, 2}).silhouette < 0.0);
    }
    SUBCASE("shuffled labels sit near zero") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> z;
        std::vector<Eigen::RowVectorXd> x;
        std::vector<int> y;
        for (int k = 0; k < 5; ++k) {
            Eigen::RowVectorXd centre(6);
            for (int j = 0; j < 6; ++j) centre(j) = z(rng);
            for (int i = 0; i < 40; ++i) {
                Eigen::RowVectorXd v = centre;
                for (int j = 0; j < 6; ++j) v(j) += 0.3 * z(rng);
                x.push_back(v);
                y.push_back(k);
            }
        }
        CHECK(clustering_metrics(x, y).silhouette > 0.5);
        std::shuffle(y.begin(), y.end(), rng);
        CHECK(std::abs(clustering_metrics(x, y).silhouette) < 0.1);
    }
    SUBCASE("errors") {
        const std::vector<Eigen::RowVectorXd> x = {row({1, 0}), row({0, 1})};
        CHECK(code_of([&] { (void)clustering_metrics(x, std::vector<int>{3, 3}); }) ==
              static_cast<int>(ErrorCode::DegeneratePartition));
        CHECK(code_of([&] { (void)clustering_metrics(x, std::vector<int>{3}); }) ==
              static_cast<int>(ErrorCode::DimensionMismatch));
        const std::vector<Eigen::RowVectorXd> z = {row({1, 0}), row({0, 0})};
        CHECK(code_of([&] { (void)clustering_metrics(z, std::vector<int>{1, 2}); }) ==
              static_cast<int>(ErrorCode::ZeroVector));
    }
}

TEST_CASE("era buckets") {
    CHECK(era_bucket_of(GregorianYear{-75000}).label == "BCE");
    CHECK(era_bucket_of(GregorianYear{-1}).label == "BCE");
    CHECK(era_bucket_of(GregorianYear{1}).label == "1-500");
    CHECK(era_bucket_of(GregorianYear{500}).label == "1-500");
    CHECK(era_bucket_of(GregorianYear{501}).label == "501-1000");
    CHECK(era_bucket_of(GregorianYear{1500}).label == "1001-1500");
    CHECK(era_bucket_of(GregorianYear{2000}).label == "1501-2000");
    CHECK(era_bucket_of(GregorianYear{2001}).label == "2001+");
    CHECK(era_buckets().size() == 6);
    for (std::size_t i = 1; i < era_buckets().size(); ++i) CHECK(era_buckets()[i].lo == era_buckets()[i - 1].hi + 1 + (i == 1));
}

TEST_CASE("synthetic task generation") {
    TaskSpec spec;
    SUBCASE("same seed, same items") {
        std::ostringstream a, b;
        write_items_jsonl(a, generate_synthetic_tasks(spec));
        write_items_jsonl(b, generate_synthetic_tasks(spec));
        CHECK(a.str() == b.str());
        spec.seed = 2;
        std::ostringstream c;
        write_items_jsonl(c, generate_synthetic_tasks(spec));
        CHECK(c.str() != a.str());
    }
    SUBCASE("60 consecutive years fill every class once") {
        spec.sampling = YearSampling::Consecutive;
        spec.n_items = 60;
        spec.year_lo = 1517;
        spec.year_hi = 2025;
        const auto items = generate_synthetic_tasks(spec);
        std::set<int> classes;
        for (const auto& it : items) classes.insert((((it.year.value() - 4) % 60) + 60) % 60);
        CHECK(items.size() == 60);
        CHECK(classes.size() == 60);
    }
    SUBCASE("long-tail draws reach BCE and every bucket") {
        const auto items = generate_synthetic_tasks(spec);
        std::map<std::string, int> per_bucket;
        for (const auto& it : items) ++per_bucket[it.bucket];
        CHECK(per_bucket.size() == 6);
        CHECK(per_bucket["BCE"] >= 1);
        // recent years dominate
        CHECK(per_bucket["1501-2000"] + per_bucket["2001+"] > per_bucket["BCE"]);
    }
    SUBCASE("answers follow the world's facts") {
        const SyntheticWorld world(spec.world_seed, spec.n_entities);
        std::array<int, 4> answer_slots{};
        for (const auto& it : generate_synthetic_tasks(spec)) {
            REQUIRE(extract_year_mentions(it.question).size() == 1);
            CHECK(extract_year_mentions(it.question)[0].year == it.year);
            CHECK(it.bucket == era_bucket_of(it.year).label);
            const std::set<std::string> distinct(it.options.begin(), it.options.end());
            CHECK(distinct.size() == 4);
            bool stated = false;
            for (int e = 0; e < world.entities(); ++e) stated |= it.filled(it.answer_index) == world.statement(e, it.year);
            CHECK(stated);
            ++answer_slots[static_cast<std::size_t>(it.answer_index)];
        }
        for (int n : answer_slots) CHECK(n > 0);
    }
    SUBCASE("facts repeat one cycle apart") {
        const SyntheticWorld world(spec.world_seed, spec.n_entities);
        for (int y : {-2000, 33, 1965}) CHECK(world.fact(1, GregorianYear{y}) == world.fact(1, GregorianYear{y + 60}));
        // no year zero: 30 BCE and AD 31 are 60 years apart
        CHECK(world.fact(2, GregorianYear{-30}) == world.fact(2, GregorianYear{31}));
    }
    SUBCASE("bad specs") {
        spec.n_items = 0;
        CHECK(code_of([&] { (void)generate_synthetic_tasks(spec); }) == static_cast<int>(ErrorCode::InvalidConfig));
        spec.n_items = 10;
        spec.n_entities = 17;
        CHECK(code_of([&] { (void)generate_synthetic_tasks(spec); }) == static_cast<int>(ErrorCode::InvalidConfig));
    }
}

TEST_CASE("suite corpora") {
    SuiteSpec spec;
    spec.tasks.n_items = 80;
    spec.exemplar_items = 20;
    spec.extra_facts = 100;
    spec.general_sentences = 50;
    const auto suite = generate_suite(spec);
    CHECK(suite.test_items.size() == 80);
    CHECK(suite.exemplar_pool.size() == 20);
    CHECK(suite.train_corpus.size() >= 200);
    CHECK(suite.general_corpus.size() == 50);
    const std::set<std::string> corpus(suite.train_corpus.begin(), suite.train_corpus.end());
    for (const auto& it : suite.test_items) CHECK(corpus.count(it.filled(it.answer_index)) == 1);
    for (const auto& s : suite.general_corpus) CHECK(extract_year_mentions(s).empty());
}

TEST_CASE("items jsonl") {
    TaskSpec spec;
    spec.n_items = 30;
    const auto items = generate_synthetic_tasks(spec);
    std::stringstream io;
    write_items_jsonl(io, items);
    const auto back = read_items_jsonl(io);
    REQUIRE(back.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(back[i].question == items[i].question);
        CHECK(back[i].options == items[i].options);
        CHECK(back[i].answer_index == items[i].answer_index);
        CHECK(back[i].year == items[i].year);
        CHECK(back[i].bucket == items[i].bucket);
    }

    auto rejects = [](const std::string& line) {
        std::istringstream in(line);
        return code_of([&] { (void)read_items_jsonl(in); }) == static_cast<int>(ErrorCode::ParseError);
    };
    CHECK(rejects(R"({"question":"In 606, A traded ____.","options":["a","b","c"],"answer_index":0,"year":606,"bucket":"501-1000"})"));
    CHECK(rejects(R"({"question":"In 606, A traded ____.","options":["a","b","c","d"],"answer_index":4,"year":606,"bucket":"501-1000"})"));
    CHECK(rejects(R"({"question":"In 606, A traded ____.","options":["a","b","c","d"],"answer_index":1,"year":606,"bucket":"BCE"})"));
    CHECK(rejects(R"({"question":"In 606, A traded it.","options":["a","b","c","d"],"answer_index":1,"year":606,"bucket":"501-1000"})"));
    CHECK(rejects("not json"));
}

TEST_CASE("prompts") {
    TaskSpec spec;
    spec.n_items = 12;
    const auto items = generate_synthetic_tasks(spec);
    spec.seed = 99;
    const auto pool = generate_synthetic_tasks(spec);
    const auto& q = items[3];
    const std::string stem = q.question.substr(0, q.question.find("____"));

    const auto zero = build_prompt(q, 3, pool, 0, 1);
    CHECK(zero.context == stem);
    CHECK(zero.query_offset == 0);

    const auto five = build_prompt(q, 3, pool, 5, 1);
    CHECK(five.context.substr(five.query_offset) == stem);
    CHECK(five.context.find("____") == std::string::npos);
    CHECK(extract_year_mentions(five.context).size() == 6);
    CHECK(build_prompt(q, 3, pool, 5, 1).context == five.context);
    CHECK(build_prompt(q, 4, pool, 5, 1).context != five.context);

    CHECK(code_of([&] { (void)build_prompt(q, 0, std::span(pool).first(4), 5, 1); }) ==
          static_cast<int>(ErrorCode::InsufficientData));

    // anchoring picks the question's year, not the first exemplar's
    auto m = tiny_model({five.context});
    const auto anchored = annotate_anchored(five.context, m.tok, five.query_offset);
    REQUIRE(anchored.class_label);
    CHECK(*anchored.class_label == to_cycle_index(q.year));
    CHECK(anchored.mentions.front().year == q.year);
}

TEST_CASE("QA evaluation") {
    TaskSpec spec;
    spec.n_items = 200;
    const auto items = generate_synthetic_tasks(spec);
    spec.seed = 5;
    spec.n_items = 20;
    const auto pool = generate_synthetic_tasks(spec);
    auto m = tiny_model({"Aldor traded salt."}, items);
    for (const auto& it : pool)
        for (int i = 0; i < 4; ++i) REQUIRE(m.tok.encode(it.filled(i), true).ids.size() > 0);

    SUBCASE("uniform logits land at chance") {
        auto flat = m.params;
        flat.at("lm_head").setZero();
        const auto r = evaluate_qa(flat, m.cfg, m.enc, m.tok, items, pool, QaOptions{});
        CHECK(r.items == 200);
        // every option ties, so the pick is option 0
        for (int p : r.predictions) CHECK(p == 0);
        const double bound = 3.0 * std::sqrt(0.25 * 0.75 / 200.0);
        CHECK(std::abs(r.accuracy() - 0.25) <= bound);
    }
    SUBCASE("conservation and determinism") {
        QaOptions opt;
        opt.shots = 2;
        opt.seed = 3;
        const auto a = evaluate_qa(m.params, m.cfg, m.enc, m.tok, items, pool, opt);
        opt.threads = 2;
        const auto b = evaluate_qa(m.params, m.cfg, m.enc, m.tok, items, pool, opt);
        CHECK(a.predictions == b.predictions);
        CHECK(a.correct == b.correct);
        std::size_t n = 0, c = 0;
        for (const auto& bk : a.buckets) {
            n += bk.items;
            c += bk.correct;
        }
        CHECK(n == items.size());
        CHECK(c == a.correct);
        CHECK(a.shots == 2);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < items.size(); ++i) hits += a.predictions[i] == items[i].answer_index;
        CHECK(hits == a.correct);
    }
    SUBCASE("one bucket") {
        std::vector<SyntheticQaItem> recent;
        for (const auto& it : items)
            if (it.bucket == "2001+") recent.push_back(it);
        REQUIRE(!recent.empty());
        const auto r = evaluate_qa(m.params, m.cfg, m.enc, m.tok, recent, pool, QaOptions{});
        int nonempty = 0;
        for (const auto& bk : r.buckets) {
            if (bk.items == 0) continue;
            ++nonempty;
            CHECK(bk.bucket.label == "2001+");
            CHECK(bk.accuracy() == r.accuracy());
        }
        CHECK(nonempty == 1);

        std::ostringstream js, csv;
        write_report_json(js, r);
        write_report_csv(csv, r);
        const auto j = nlohmann::json::parse(js.str());
        CHECK(j["items"] == recent.size());
        CHECK(j["buckets"].size() == 6);
        CHECK(j["buckets"][0]["accuracy"].is_null());
        const std::string text = csv.str();
        CHECK(text.rfind("bucket,lo,hi,items,correct,accuracy\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    }
}

TEST_CASE("embedding export") {
    const std::vector<GregorianYear> years = {GregorianYear{1864}, GregorianYear{-3}};
    const std::vector<Eigen::RowVectorXd> e = {row({0.5, -1.25}), row({1, 2})};
    std::ostringstream out;
    write_embedding_csv(out, years, e);
    std::istringstream in(out.str());
    std::string header, first, second;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    CHECK(header == "year,class,e0,e1");
    CHECK(first == "1864,1,0.5,-1.25");
    CHECK(second.rfind("-3,", 0) == 0);
}
