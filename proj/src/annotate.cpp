// SPDX-License-Identifier: Apache-2.0

#include "ticktack/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "ticktack/error.hpp"

namespace ticktack {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

struct NumberToken {
    std::size_t end = 0;
    long long value = 0;
    int digits = 0;
    bool grouped = false;
};

// Reads "1965" or "75,000" starting at i. Comma groups must be exactly three
// digits and the first group at most three.
std::optional<NumberToken> read_number(std::string_view s, std::size_t i) {
    if (i >= s.size() || !is_digit(s[i])) return std::nullopt;
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    NumberToken tok;
    std::string digits(s.substr(i, j - i));
    if (j - i <= 3) {
        auto digit_at = [&](std::size_t p) { return p < s.size() && is_digit(s[p]); };
        std::size_t k = j;
        std::string grouped = digits;
        while (k < s.size() && s[k] == ',' && digit_at(k + 1) && digit_at(k + 2) &&
               digit_at(k + 3) && !digit_at(k + 4)) {
            grouped += std::string(s.substr(k + 1, 3));
            k += 4;
        }
        if (k != j) {
            digits = grouped;
            j = k;
            tok.grouped = true;
        }
    }
    if (digits.size() > 9) return std::nullopt;
    tok.end = j;
    tok.digits = static_cast<int>(digits.size());
    tok.value = std::stoll(digits);
    return tok;
}

// Matches an era word at position i that ends at a word boundary.
std::optional<std::pair<std::size_t, int>> read_era(std::string_view s, std::size_t i) {
    static constexpr std::pair<std::string_view, int> kEras[] = {
        {"BCE", -1}, {"BC", -1}, {"AD", 1}, {"CE", 1}};
    for (auto [word, sign] : kEras) {
        if (s.substr(i, word.size()) == word) {
            const std::size_t end = i + word.size();
            if (end == s.size() || !is_alnum(s[end])) return std::make_pair(end, sign);
        }
    }
    return std::nullopt;
}

std::size_t skip_spaces(std::string_view s, std::size_t i) {
    while (i < s.size() && s[i] == ' ') ++i;
    return i;
}

std::optional<GregorianYear> make_year(long long value) {
    if (value == 0 || value < GregorianYear::kMin || value > GregorianYear::kMax) {
        return std::nullopt;
    }
    return GregorianYear(static_cast<int>(value));
}

}  // namespace

std::vector<YearMention> extract_year_mentions(std::string_view text) {
    std::vector<YearMention> out;
    std::size_t i = 0;
    auto emit = [&](std::size_t start, std::size_t end, long long value) {
        if (auto year = make_year(value)) {
            out.push_back({{start, end}, *year, std::string(text.substr(start, end - start))});
            return true;
        }
        return false;
    };
    while (i < text.size()) {
        const bool boundary = i == 0 || !is_alnum(text[i - 1]);
        if (!boundary) {
            ++i;
            continue;
        }
        // "AD 606"
        if (text.substr(i, 2) == "AD" && i + 2 < text.size() && text[i + 2] == ' ') {
            const std::size_t k = skip_spaces(text, i + 2);
            if (auto num = read_number(text, k)) {
                if ((num->end == text.size() || !is_alnum(text[num->end])) &&
                    emit(i, num->end, num->value)) {
                    i = num->end;
                    continue;
                }
            }
        }
        if (is_digit(text[i])) {
            // part of a decimal such as 3.1415
            if (i >= 2 && text[i - 1] == '.' && is_digit(text[i - 2])) {
                while (i < text.size() && is_digit(text[i])) ++i;
                continue;
            }
            auto num = read_number(text, i);
            if (!num) {
                while (i < text.size() && is_digit(text[i])) ++i;
                continue;
            }
            const std::size_t k = skip_spaces(text, num->end);
            if (auto era = read_era(text, k)) {
                if (emit(i, era->first, era->second * num->value)) {
                    i = era->first;
                    continue;
                }
            }
            const bool trailing_ok =
                num->end == text.size() ||
                (!is_alnum(text[num->end]) &&
                 !(text[num->end] == '.' && num->end + 1 < text.size() &&
                   is_digit(text[num->end + 1])) &&
                 !(text[num->end] == ',' && num->end + 1 < text.size() &&
                   is_digit(text[num->end + 1])));
            if (!num->grouped && (num->digits == 3 || num->digits == 4) && num->value >= 100 &&
                num->value <= 2999 && trailing_ok) {
                emit(i, num->end, num->value);
            }
            i = num->end;
            continue;
        }
        ++i;
    }
    return out;
}

std::vector<int> AnnotatedSequence::mention_positions() const {
    std::vector<int> out;
    for (std::size_t p = 0; p < token_spans.size(); ++p) {
        const auto& span = token_spans[p];
        if (span.end <= span.start) continue;
        for (const auto& m : mentions) {
            if (span.start < m.char_span.end && m.char_span.start < span.end) {
                out.push_back(static_cast<int>(p));
                break;
            }
        }
    }
    return out;
}

std::string format_mention(GregorianYear year) {
    const int v = year.value();
    if (v > 0) {
        if (v >= 100 && v <= 2999) return std::to_string(v);
        return "AD " + std::to_string(v);
    }
    std::string digits = std::to_string(-v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out + " BCE";
}

AnnotatedSequence annotate(std::string_view text, const Tokenizer& tokenizer, bool strict) {
    AnnotatedSequence seq;
    seq.text = std::string(text);
    auto enc = tokenizer.encode(text, strict);
    seq.tokens = std::move(enc.ids);
    seq.token_spans = std::move(enc.spans);
    seq.mentions = extract_year_mentions(text);
    if (!seq.mentions.empty()) seq.class_label = to_cycle_index(seq.mentions.front().year);
    return seq;
}

void YearProfile::add_text(std::string_view text) {
    for (const auto& m : extract_year_mentions(text)) add_year(m.year);
}

void YearProfile::add_year(GregorianYear year) {
    ++counts_[year.value()];
    ++total_;
}

void YearProfile::merge(const YearProfile& other) {
    for (auto [year, n] : other.counts_) counts_[year] += n;
    total_ += other.total_;
}

YearHistogram YearProfile::gregorian(std::int64_t bin_width) const {
    if (bin_width < 1) throw Error(ErrorCode::InvalidConfig, "bin width must be >= 1");
    YearHistogram h;
    h.bin_width_years = bin_width;
    h.total = total_;
    if (counts_.empty()) return h;
    const std::int64_t first = floor_div(counts_.begin()->first, bin_width);
    const std::int64_t last = floor_div(counts_.rbegin()->first, bin_width);
    for (std::int64_t b = first; b <= last; ++b) {
        h.bins.push_back({b * bin_width, (b + 1) * bin_width, 0});
    }
    for (auto [year, n] : counts_) {
        h.bins[static_cast<std::size_t>(floor_div(year, bin_width) - first)].count += n;
    }
    return h;
}

YearHistogram YearProfile::sexagenary() const {
    YearHistogram h;
    h.bin_width_years = 1;
    h.total = total_;
    for (int k = 0; k < CycleIndex::kTerms; ++k) h.bins.push_back({k, k + 1, 0});
    for (auto [year, n] : counts_) {
        h.bins[static_cast<std::size_t>(to_cycle_index(GregorianYear(year)).value())].count += n;
    }
    return h;
}

std::vector<std::string> read_corpus_texts(std::istream& in) {
    std::vector<std::string> texts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError,
                        "corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
            throw Error(ErrorCode::ParseError,
                        "corpus line " + std::to_string(line_no) + ": missing string field 'text'");
        }
        texts.push_back(record["text"].get<std::string>());
    }
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read error on corpus stream");
    return texts;
}

std::vector<std::string> read_corpus_texts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open corpus '" + path + "'");
    return read_corpus_texts(in);
}

void write_corpus_texts(std::ostream& out, const std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        nlohmann::json record{{"id", i}, {"text", texts[i]}};
        out << record.dump() << '\n';
    }
}

YearProfile profile_corpus(std::istream& in) {
    YearProfile profile;
    for (const auto& text : read_corpus_texts(in)) profile.add_text(text);
    return profile;
}

YearHistogram profile_gregorian(std::istream& in, std::int64_t bin_width) {
    if (bin_width < 1) throw Error(ErrorCode::InvalidConfig, "bin width must be >= 1");
    return profile_corpus(in).gregorian(bin_width);
}

YearHistogram profile_sexagenary(std::istream& in) { return profile_corpus(in).sexagenary(); }

UniformityMetrics uniformity_metrics(const YearHistogram& h) {
    if (h.total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no mass");
    const auto n_bins = static_cast<double>(h.bins.size());
    const auto total = static_cast<double>(h.total);
    const double expected = total / n_bins;
    UniformityMetrics m;
    double entropy = 0.0;
    for (const auto& bin : h.bins) {
        const auto c = static_cast<double>(bin.count);
        if (c > 0) {
            const double p = c / total;
            entropy -= p * std::log(p);
        }
        m.chi_square += (c - expected) * (c - expected) / expected;
    }
    m.normalized_entropy = h.bins.size() > 1 ? entropy / std::log(n_bins) : 0.0;
    return m;
}

void write_histogram_csv(std::ostream& out, const YearHistogram& h) {
    out << "bin_start,bin_end,count\n";
    for (const auto& bin : h.bins) out << bin.start << ',' << bin.end << ',' << bin.count << '\n';
}

}  // namespace ticktack
