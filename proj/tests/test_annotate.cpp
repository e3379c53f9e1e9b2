// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "ticktack/annotate.hpp"
#include "ticktack/error.hpp"

using namespace ticktack;

namespace {

std::vector<int> years_of(std::string_view text) {
    std::vector<int> out;
    for (const auto& m : extract_year_mentions(text)) out.push_back(m.year.value());
    return out;
}

std::string corpus_of(const std::vector<std::string>& texts) {
    std::ostringstream os;
    write_corpus_texts(os, texts);
    return os.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("extraction examples") {
    CHECK(years_of("France successfully launched its first artificial Earth satellite in 1965.") ==
          std::vector<int>{1965});
    CHECK(years_of("In 606 AD, ____sent an ambassador") == std::vector<int>{606});
    CHECK(years_of("from 75,000 BCE to 2025 AD") == std::vector<int>{-75000, 2025});
    CHECK(years_of("AD 45 and 300 BC and 12 CE") == std::vector<int>{45, -300, 12});
    CHECK(years_of("no years here") == std::vector<int>{});
}

TEST_CASE("quantities are not years") {
    CHECK(years_of("pi is 3.1415") == std::vector<int>{});
    CHECK(years_of("12,500 bales") == std::vector<int>{});
    CHECK(years_of("population 25000") == std::vector<int>{});
    CHECK(years_of("room 42") == std::vector<int>{});
    CHECK(years_of("3000 sheep") == std::vector<int>{});
    CHECK(years_of("version 1999.5") == std::vector<int>{});
    CHECK(years_of("code A1965") == std::vector<int>{});
    CHECK(years_of("0 BCE") == std::vector<int>{});
}

TEST_CASE("mention spans and surfaces") {
    const std::string text = "Tools from 75,000 BCE.";
    const auto m = extract_year_mentions(text);
    REQUIRE(m.size() == 1);
    CHECK(m[0].surface == "75,000 BCE");
    CHECK(text.substr(m[0].char_span.start, m[0].char_span.end - m[0].char_span.start) == m[0].surface);
    CHECK(m[0].char_span.start < m[0].char_span.end);
}

TEST_CASE("format_mention reads back") {
    for (int y = GregorianYear::kMin; y <= GregorianYear::kMax; y += 7) {
        if (y == 0) continue;
        const auto got = years_of("In " + format_mention(GregorianYear(y)) + ", x.");
        REQUIRE(got.size() == 1);
        CHECK(got[0] == y);
    }
    CHECK(format_mention(GregorianYear(-75000)) == "75,000 BCE");
    CHECK(format_mention(GregorianYear(45)) == "AD 45");
    CHECK(format_mention(GregorianYear(606)) == "606");
}

TEST_CASE("annotate stamps the first mention's class") {
    const std::vector<std::string> texts = {"In 1965, it rained.", "Nothing.", "In 1864 and 1999."};
    const auto tok = Tokenizer::build(texts);
    auto s = annotate(texts[0], tok);
    REQUIRE(s.class_label);
    CHECK(s.class_label->value() == 42);
    CHECK(s.tokens.front() == Tokenizer::kBos);
    CHECK(s.tokens.size() == s.token_spans.size());
    CHECK_FALSE(annotate(texts[1], tok).class_label);
    s = annotate(texts[2], tok);
    REQUIRE(s.class_label);
    CHECK(s.class_label->value() == 1);
    // "1864" is four digit tokens after "In"
    CHECK(s.mention_positions() == std::vector<int>{2, 3, 4, 5, 7, 8, 9, 10});
}

TEST_CASE("tokenizer") {
    const auto tok = Tokenizer::build(std::vector<std::string>{"In 1965, Aldor traded salt."});
    const auto e = tok.encode("In 1965, Aldor traded salt.");
    CHECK(e.ids.size() == 1 + 1 + 4 + 1 + 3 + 1);
    CHECK(tok.decode(e.ids) == "In 1965, Aldor traded salt.");
    CHECK(tok.encode("Unknown", false).ids[1] == Tokenizer::kUnk);
    CHECK_THROWS_AS((void)tok.encode("Unknown", true), Error);
    CHECK_THROWS_AS((void)tok.encode("caf\xc3\xa9"), Error);
    const auto again = Tokenizer::from_vocabulary(tok.vocabulary());
    CHECK(again.encode("In 1965").ids == tok.encode("In 1965").ids);
}

TEST_CASE("gregorian histogram fixture") {
    std::istringstream in(corpus_of({"In 1965.", "Again 1965.", "In 606 AD."}));
    const auto h = profile_gregorian(in, 200);
    CHECK(h.total == 3);
    std::map<std::int64_t, std::uint64_t> nonzero;
    for (const auto& b : h.bins) {
        CHECK(b.end - b.start == 200);
        if (b.count) nonzero[b.start] = b.count;
    }
    CHECK(nonzero == std::map<std::int64_t, std::uint64_t>{{600, 1}, {1800, 2}});
    CHECK(h.bins.front().start == 600);
    CHECK(h.bins.back().end == 2000);
}

TEST_CASE("edge histograms") {
    std::istringstream empty("");
    const auto h = profile_gregorian(empty, 200);
    CHECK(h.total == 0);
    CHECK(h.bins.empty());
    CHECK_THROWS_AS(uniformity_metrics(h), Error);

    std::istringstream far(corpus_of({"Tools from 75,000 BCE."}));
    const auto f = profile_gregorian(far, 200);
    REQUIRE(f.bins.size() == 1);
    CHECK(f.bins[0].start == -75000);
    CHECK(f.bins[0].count == 1);

    std::istringstream none("");
    const auto s = profile_sexagenary(none);
    CHECK(s.bins.size() == 60);
    CHECK(s.total == 0);

    std::istringstream bad("{\"id\": 1}\n");
    CHECK_THROWS_AS(profile_sexagenary(bad), Error);
}

TEST_CASE("sexagenary histogram") {
    std::istringstream in(corpus_of({"In 1804.", "In 1864.", "In 1924."}));
    const auto h = profile_sexagenary(in);
    REQUIRE(h.bins.size() == 60);
    for (int k = 0; k < 60; ++k) CHECK(h.bins[static_cast<std::size_t>(k)].count == (k == 1 ? 3u : 0u));

    YearProfile p;
    for (int y = 1500; y < 1560; ++y) p.add_year(GregorianYear(y));
    for (const auto& b : p.sexagenary().bins) CHECK(b.count == 1);
}

TEST_CASE("uniformity metrics") {
    YearHistogram h;
    for (int k = 0; k < 5; ++k) h.bins.push_back({k, k + 1, 4});
    h.total = 20;
    auto m = uniformity_metrics(h);
    CHECK(m.normalized_entropy == doctest::Approx(1.0));
    CHECK(m.chi_square == 0.0);

    YearHistogram one;
    for (int k = 0; k < 60; ++k) one.bins.push_back({k, k + 1, k == 7 ? 9u : 0u});
    one.total = 9;
    CHECK(uniformity_metrics(one).normalized_entropy == 0.0);

    YearHistogram three;
    three.bins = {{0, 1, 30}, {1, 2, 10}, {2, 3, 20}};
    three.total = 60;
    m = uniformity_metrics(three);
    const double p[] = {0.5, 1.0 / 6.0, 1.0 / 3.0};
    double hh = 0.0;
    for (double q : p) hh -= q * std::log(q);
    CHECK(m.normalized_entropy == doctest::Approx(hh / std::log(3.0)).epsilon(1e-14));
    CHECK(m.chi_square == doctest::Approx((100.0 + 100.0 + 0.0) / 20.0));
}

TEST_CASE("conservation, chunking and re-binning") {
    std::ifstream in(TICKTACK_TEST_DATA "/longtail_corpus.jsonl");
    const auto texts = read_corpus_texts(in);
    YearProfile whole;
    for (const auto& t : texts) whole.add_text(t);

    YearProfile a, b;
    for (std::size_t i = 0; i < texts.size(); ++i) (i % 3 ? a : b).add_text(texts[i]);
    a.merge(b);
    CHECK(a.gregorian(200).bins == whole.gregorian(200).bins);
    CHECK(a.sexagenary().bins == whole.sexagenary().bins);

    std::uint64_t g = 0, s = 0;
    for (const auto& bin : whole.gregorian(200).bins) g += bin.count;
    for (const auto& bin : whole.sexagenary().bins) s += bin.count;
    CHECK(g == whole.total());
    CHECK(s == whole.total());

    std::map<std::int64_t, std::uint64_t> coarse, fine;
    for (const auto& bin : whole.gregorian(200).bins) coarse[bin.start] += bin.count;
    for (const auto& bin : whole.gregorian(100).bins) fine[floor_div(bin.start, 200) * 200] += bin.count;
    CHECK(coarse == fine);
}

TEST_CASE("golden 200-year histogram") {
    std::ifstream in(TICKTACK_TEST_DATA "/longtail_corpus.jsonl");
    std::ostringstream csv;
    write_histogram_csv(csv, profile_gregorian(in, 200));
    CHECK(csv.str() == slurp(TICKTACK_TEST_DATA "/longtail_gregorian_200.csv"));
}

TEST_CASE("sexagenary view is flatter on long-tail corpora") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        YearProfile p;
        const int span = 60 + static_cast<int>(rng() % 5000);
        for (int i = 0; i < 500; ++i) {
            int a = 2025 - static_cast<int>(std::pow(u(rng), 3.0) * span);
            p.add_year(from_astronomical(a));
        }
        // make sure 60 consecutive years are covered
        for (int y = 1966; y <= 2025; ++y) p.add_year(GregorianYear(y));
        const auto sx = uniformity_metrics(p.sexagenary()).normalized_entropy;
        const auto gr = uniformity_metrics(p.gregorian(200)).normalized_entropy;
        CHECK_MESSAGE(sx >= gr, "seed ", seed);
    }
}
