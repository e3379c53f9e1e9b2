// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>
#include <random>

#include "ticktack/calendar.hpp"
#include "ticktack/error.hpp"

using namespace ticktack;

namespace {

// Walks the calendar one year at a time from the anchor 4 AD (index 1),
// forward and backward, skipping year zero. No modular formula involved.
std::map<int, int> walk_oracle(int lo, int hi) {
    std::map<int, int> idx;
    int k = 1;
    for (int y = 4; y <= hi; y = (y == -1 ? 1 : y + 1)) {
        idx[y] = k;
        k = k == 59 ? 0 : k + 1;
    }
    k = 1;
    for (int y = 4; y >= lo; y = (y == 1 ? -1 : y - 1)) {
        idx[y] = k;
        k = k == 0 ? 59 : k - 1;
    }
    return idx;
}

int idx(int y) { return to_cycle_index(GregorianYear(y)).value(); }

}  // namespace

TEST_CASE("worked examples") {
    CHECK(idx(1864) == 1);
    CHECK(idx(1924) == 1);
    CHECK(idx(1965) == 42);
    CHECK(idx(2025) == 42);
    CHECK(idx(-1) == 57);
    CHECK(idx(3) == 0);
    CHECK(idx(4) == 1);
    CHECK(term_of(CycleIndex(1)).name == "Jiazi");
    CHECK(term_of(CycleIndex(42)).name == "Yisi");
    CHECK(term_of(CycleIndex(0)).name == "Guihai");
    CHECK(term_of(CycleIndex(0)).term_number == 60);
}

TEST_CASE("formula agrees with the walking oracle everywhere") {
    const auto oracle = walk_oracle(GregorianYear::kMin, GregorianYear::kMax);
    std::size_t bad = 0;
    for (auto [y, k] : oracle) bad += idx(y) != k;
    CHECK(bad == 0);
    CHECK(oracle.size() == static_cast<std::size_t>(GregorianYear::kMax - GregorianYear::kMin));
}

TEST_CASE("successor steps the index by one") {
    std::size_t bad = 0;
    for (GregorianYear y(GregorianYear::kMin); y.value() < 2100; y = y.successor())
        bad += to_cycle_index(y.successor()).value() != (to_cycle_index(y).value() + 1) % 60;
    CHECK(bad == 0);
    CHECK(GregorianYear(-1).successor().value() == 1);
}

TEST_CASE("year validation") {
    CHECK_THROWS_AS(GregorianYear(0), Error);
    try {
        GregorianYear(0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::YearZero);
    }
    try {
        GregorianYear(10000);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfRange);
    }
    CHECK_THROWS_AS(GregorianYear(-75001), Error);
    CHECK_THROWS_AS(CycleIndex(60), Error);
    CHECK_THROWS_AS(CycleIndex(-1), Error);
}

TEST_CASE("term table") {
    for (int n = 1; n <= 60; ++n) {
        const auto t = term_from_number(n);
        CHECK(t.stem == (n - 1) % 10);
        CHECK(t.branch == (n - 1) % 12);
        CHECK(t.stem % 2 == t.branch % 2);
        CHECK(term_by_name(t.name) == t);
    }
    CHECK(term_by_name("yisi").term_number == 42);
    CHECK(term_from_number(42).name == "Yisi");
    CHECK_THROWS_AS(term_by_name("Jiachou"), Error);
    CHECK_THROWS_AS(term_from_number(61), Error);
}

TEST_CASE("astronomical and epoch") {
    CHECK(astronomical(GregorianYear(1)) == 1);
    CHECK(astronomical(GregorianYear(-1)) == 0);
    CHECK(astronomical(GregorianYear(-100)) == -99);
    CHECK(from_astronomical(0).value() == -1);
    CHECK(epoch_index(GregorianYear(1965)) == 32);
    CHECK(epoch_index(GregorianYear(2025)) == 33);
    CHECK(epoch_index(GregorianYear(4)) == 0);
    CHECK(epoch_index(GregorianYear(3)) == -1);
}

TEST_CASE("years_in_term") {
    const auto jiazi = term_by_name("Jiazi");
    auto v = years_in_term(jiazi, GregorianYear(1800), GregorianYear(1950));
    REQUIRE(v.size() == 3);
    CHECK(v[0].value() == 1804);
    CHECK(v[1].value() == 1864);
    CHECK(v[2].value() == 1924);
    CHECK(years_in_term(jiazi, GregorianYear(1865), GregorianYear(1923)).empty());
    auto yisi = years_in_term(term_by_name("Yisi"), GregorianYear(1965), GregorianYear(1965));
    REQUIRE(yisi.size() == 1);
    CHECK(yisi[0].value() == 1965);
    CHECK_THROWS_AS(years_in_term(jiazi, GregorianYear(1950), GregorianYear(1800)), Error);

    // brute-force scan across year zero
    for (int n = 1; n <= 60; n += 7) {
        const auto t = term_from_number(n);
        std::vector<int> scan;
        for (GregorianYear y(-300);; y = y.successor()) {
            if (term_of(to_cycle_index(y)) == t) scan.push_back(y.value());
            if (y.value() == 300) break;
        }
        std::vector<int> got;
        for (auto y : years_in_term(t, GregorianYear(-300), GregorianYear(300))) got.push_back(y.value());
        CHECK(got == scan);
    }
}

TEST_CASE("round trip on random years") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> d(GregorianYear::kMin, GregorianYear::kMax);
    int done = 0;
    while (done < 10000) {
        const int v = d(rng);
        if (v == 0) continue;
        const GregorianYear y(v);
        const auto got = years_in_term(term_of(to_cycle_index(y)), y, y);
        REQUIRE(got.size() == 1);
        CHECK(got[0] == y);
        ++done;
    }
}

TEST_CASE("parse and format") {
    CHECK(parse_year("606").value() == 606);
    CHECK(parse_year("-75000").value() == -75000);
    CHECK(parse_year("75000BCE").value() == -75000);
    CHECK(parse_year("75,000 BC").value() == -75000);
    CHECK(parse_year("AD 606").value() == 606);
    CHECK(parse_year("606 AD").value() == 606);
    CHECK_THROWS_AS(parse_year("0"), Error);
    CHECK_THROWS_AS(parse_year("abc"), Error);
    CHECK(format_year(GregorianYear(-3)) == "3 BCE");
    CHECK(format_year(GregorianYear(1965)) == "1965");
}
