// SPDX-License-Identifier: Apache-2.0

#include "ticktack/calendar.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "ticktack/error.hpp"

namespace ticktack {

GregorianYear::GregorianYear(int value) : value_(value) {
    if (value == 0) {
        throw Error(ErrorCode::YearZero, "no year zero in the Gregorian calendar");
    }
    if (value < kMin || value > kMax) {
        throw Error(ErrorCode::OutOfRange,
                    "year " + std::to_string(value) + " outside supported range [" +
                        std::to_string(kMin) + ", " + std::to_string(kMax) + "]");
    }
}

GregorianYear GregorianYear::successor() const {
    return GregorianYear(value_ == -1 ? 1 : value_ + 1);
}

CycleIndex::CycleIndex(int value) : value_(value) {
    if (value < 0 || value >= kTerms) {
        throw Error(ErrorCode::OutOfRange, "cycle index " + std::to_string(value) +
                                               " outside [0, 59]");
    }
}

CycleIndex to_cycle_index(GregorianYear year) {
    const std::int64_t t = year.value();
    std::int64_t raw = 0;
    if (t < 0) {
        raw = 60 - std::llabs(t) - 2;
    } else if (t < 4) {
        raw = 60 - std::llabs(t - 3);
    } else {
        raw = t - 3;
    }
    return CycleIndex(static_cast<int>(floor_mod(raw, 60)));
}

SexagenaryTerm term_from_number(int term_number) {
    if (term_number < 1 || term_number > 60) {
        throw Error(ErrorCode::OutOfRange,
                    "term number " + std::to_string(term_number) + " outside [1, 60]");
    }
    SexagenaryTerm term;
    term.term_number = term_number;
    term.stem = (term_number - 1) % 10;
    term.branch = (term_number - 1) % 12;
    std::string branch(kEarthlyBranches[static_cast<std::size_t>(term.branch)]);
    branch[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(branch[0])));
    term.name = std::string(kHeavenlyStems[static_cast<std::size_t>(term.stem)]) + branch;
    return term;
}

SexagenaryTerm term_of(CycleIndex index) {
    return term_from_number(static_cast<int>(floor_mod(index.value() + 59, 60)) + 1);
}

SexagenaryTerm term_by_name(std::string_view name) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    const std::string wanted = lower(name);
    for (int n = 1; n <= 60; ++n) {
        auto term = term_from_number(n);
        if (lower(term.name) == wanted) return term;
    }
    throw Error(ErrorCode::ParseError, "unknown sexagenary term '" + std::string(name) + "'");
}

int astronomical(GregorianYear year) noexcept {
    return year.value() > 0 ? year.value() : year.value() + 1;
}

GregorianYear from_astronomical(int astronomical_year) {
    return GregorianYear(astronomical_year > 0 ? astronomical_year : astronomical_year - 1);
}

int epoch_index(GregorianYear year) noexcept {
    return static_cast<int>(floor_div(astronomical(year) - 4, 60));
}

std::vector<GregorianYear> years_in_term(const SexagenaryTerm& term, GregorianYear lo,
                                         GregorianYear hi) {
    if (hi < lo) {
        throw Error(ErrorCode::InvalidRange, "years_in_term: lo must not exceed hi");
    }
    // astronomical year a has term number ((a - 4) mod 60) + 1
    const int lo_a = astronomical(lo);
    const int hi_a = astronomical(hi);
    const auto offset = floor_mod(term.term_number - 1 - (lo_a - 4), 60);
    std::vector<GregorianYear> out;
    for (std::int64_t a = lo_a + offset; a <= hi_a; a += 60) {
        out.push_back(from_astronomical(static_cast<int>(a)));
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(a[i])) !=
            std::toupper(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

}  // namespace

GregorianYear parse_year(std::string_view text) {
    std::string_view s = trim(text);
    int sign = 1;
    bool era_seen = false;
    auto strip_suffix = [&](std::string_view marker, int marker_sign) {
        if (s.size() >= marker.size() && iequals(s.substr(s.size() - marker.size()), marker)) {
            s = trim(s.substr(0, s.size() - marker.size()));
            sign = marker_sign;
            era_seen = true;
        }
    };
    strip_suffix("BCE", -1);
    if (!era_seen) strip_suffix("BC", -1);
    if (!era_seen) strip_suffix("CE", 1);
    if (!era_seen) strip_suffix("AD", 1);
    if (!era_seen && s.size() >= 2 && iequals(s.substr(0, 2), "AD")) {
        s = trim(s.substr(2));
        era_seen = true;
    }
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        if (era_seen) throw Error(ErrorCode::ParseError, "signed year with era marker");
        sign = s.front() == '-' ? -1 : 1;
        s.remove_prefix(1);
    }
    std::string digits;
    for (char c : s) {
        if (c == ',') continue;
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw Error(ErrorCode::ParseError, "cannot parse year '" + std::string(text) + "'");
        }
        digits.push_back(c);
    }
    if (digits.empty() || digits.size() > 9) {
        throw Error(ErrorCode::ParseError, "cannot parse year '" + std::string(text) + "'");
    }
    int magnitude = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), magnitude);
    return GregorianYear(sign * magnitude);
}

std::string format_year(GregorianYear year) {
    if (year.is_bce()) return std::to_string(-year.value()) + " BCE";
    return std::to_string(year.value());
}

}  // namespace ticktack
