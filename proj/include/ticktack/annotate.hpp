// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ticktack/calendar.hpp"
#include "ticktack/tokenizer.hpp"

namespace ticktack {

struct YearMention {
    CharSpan char_span;
    GregorianYear year{1};
    std::string surface;
};

/// Finds year mentions, leftmost-longest and non-overlapping. Recognized
/// forms: "N AD", "AD N", "N CE", "N BCE", "N BC" (N may carry thousands
/// separators, as in "75,000 BCE") and bare 3-4 digit numbers in
/// [100, 2999] that are not part of a larger number.
std::vector<YearMention> extract_year_mentions(std::string_view text);

/// Renders a year so that extract_year_mentions reads it back: "606",
/// "AD 45", "75,000 BCE".
std::string format_mention(GregorianYear year);

struct AnnotatedSequence {
    std::string text;
    std::vector<int> tokens;
    std::vector<CharSpan> token_spans;
    std::vector<YearMention> mentions;
    std::optional<CycleIndex> class_label;  // class of mentions.front()

    [[nodiscard]] std::size_t length() const noexcept { return tokens.size(); }

    /// Token positions whose character span overlaps any mention.
    [[nodiscard]] std::vector<int> mention_positions() const;
};

AnnotatedSequence annotate(std::string_view text, const Tokenizer& tokenizer,
                           bool strict = false);

struct HistogramBin {
    std::int64_t start = 0;  // inclusive
    std::int64_t end = 0;    // exclusive
    std::uint64_t count = 0;

    friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Dense histogram: `bins` covers every bin between the first and last
/// occupied one (Gregorian view) or all 60 cycle indices (sexagenary view).
struct YearHistogram {
    std::int64_t bin_width_years = 1;
    std::vector<HistogramBin> bins;
    std::uint64_t total = 0;
};

/// Exact-count accumulator behind both profiling views. Folding documents in
/// any chunking and merging accumulators gives identical histograms.
class YearProfile {
public:
    void add_text(std::string_view text);
    void add_year(GregorianYear year);
    void merge(const YearProfile& other);

    [[nodiscard]] YearHistogram gregorian(std::int64_t bin_width) const;
    [[nodiscard]] YearHistogram sexagenary() const;
    [[nodiscard]] std::uint64_t total() const noexcept { return total_; }

private:
    std::map<int, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Reads newline-delimited JSON records ({"text": ..., "id": ...}).
/// Throws Error{ParseError} on malformed records.
std::vector<std::string> read_corpus_texts(std::istream& in);
std::vector<std::string> read_corpus_texts(const std::string& path);
void write_corpus_texts(std::ostream& out, const std::vector<std::string>& texts);

YearProfile profile_corpus(std::istream& in);

YearHistogram profile_gregorian(std::istream& in, std::int64_t bin_width);
YearHistogram profile_sexagenary(std::istream& in);

struct UniformityMetrics {
    double normalized_entropy = 0.0;
    double chi_square = 0.0;
};

/// Entropy of the bin distribution divided by log(#bins), plus Pearson's
/// chi-square against a uniform spread. A one-bin histogram has entropy 0.
UniformityMetrics uniformity_metrics(const YearHistogram& h);

void write_histogram_csv(std::ostream& out, const YearHistogram& h);

}  // namespace ticktack
