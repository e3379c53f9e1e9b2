// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ticktack {

/// Proleptic Gregorian year with no year zero: -1 is 1 BCE, 1 is 1 AD.
class GregorianYear {
public:
    static constexpr int kMin = -75000;
    static constexpr int kMax = 9999;

    /// Throws Error{YearZero} for 0 and Error{OutOfRange} outside [kMin, kMax].
    explicit GregorianYear(int value);

    [[nodiscard]] int value() const noexcept { return value_; }
    [[nodiscard]] bool is_bce() const noexcept { return value_ < 0; }

    /// The next year on the calendar, skipping the nonexistent year zero.
    [[nodiscard]] GregorianYear successor() const;

    friend auto operator<=>(const GregorianYear&, const GregorianYear&) = default;

private:
    int value_;
};

/// Position of a year in the 60-term cycle. Index 1 is Jiazi, index 0 is Guihai.
class CycleIndex {
public:
    static constexpr int kTerms = 60;

    explicit CycleIndex(int value);

    [[nodiscard]] int value() const noexcept { return value_; }

    friend auto operator<=>(const CycleIndex&, const CycleIndex&) = default;

private:
    int value_;
};

struct SexagenaryTerm {
    int stem = 0;         // 0 = Jia .. 9 = Gui
    int branch = 0;       // 0 = Zi .. 11 = Hai
    int term_number = 1;  // 1 = Jiazi .. 60 = Guihai
    std::string name;

    friend bool operator==(const SexagenaryTerm&, const SexagenaryTerm&) = default;
};

inline constexpr std::array<std::string_view, 10> kHeavenlyStems = {
    "Jia", "Yi", "Bing", "Ding", "Wu", "Ji", "Geng", "Xin", "Ren", "Gui"};
inline constexpr std::array<std::string_view, 12> kEarthlyBranches = {
    "Zi", "Chou", "Yin", "Mao", "Chen", "Si", "Wu", "Wei", "Shen", "You", "Xu", "Hai"};

/// Floor-style modulus; the result always lies in [0, m).
constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t m) noexcept {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t m) noexcept {
    return (a - floor_mod(a, m)) / m;
}

CycleIndex to_cycle_index(GregorianYear year);
SexagenaryTerm term_of(CycleIndex index);
SexagenaryTerm term_from_number(int term_number);

/// Looks up a term by its romanized name, case-insensitively ("Jiazi", "yisi").
SexagenaryTerm term_by_name(std::string_view name);

/// Astronomical numbering: 1 BCE becomes 0, 2 BCE becomes -1.
int astronomical(GregorianYear year) noexcept;
GregorianYear from_astronomical(int astronomical_year);

/// Number of completed 60-year cycles since the Jiazi year 4 AD.
int epoch_index(GregorianYear year) noexcept;

/// Every year in [lo, hi] that falls on `term`, ascending.
std::vector<GregorianYear> years_in_term(const SexagenaryTerm& term, GregorianYear lo,
                                         GregorianYear hi);

/// Parses "606", "-75000", "75000BCE", "75,000 BC", "606 AD", "AD 606".
GregorianYear parse_year(std::string_view text);

/// "1965" or "75000 BCE".
std::string format_year(GregorianYear year);

}  // namespace ticktack
