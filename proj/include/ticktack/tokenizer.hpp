// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ticktack {

struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Encoding {
    std::vector<int> ids;
    std::vector<CharSpan> spans;  // spans[i] locates ids[i] in the source text
};

/// Word-level tokenizer over ASCII text. Alphabetic runs are words, every
/// digit is its own token, and any other visible character is a single
/// token. Position 0 of every encoding is <bos>.
class Tokenizer {
public:
    static constexpr int kUnk = 0;
    static constexpr int kBos = 1;

    Tokenizer();

    /// Vocabulary of the special tokens, the digits and every piece in `texts`.
    static Tokenizer build(std::span<const std::string> texts);
    static Tokenizer from_vocabulary(std::vector<std::string> vocab);

    /// Throws Error{TokenizationFailure} on non-ASCII or control bytes, and on
    /// out-of-vocabulary pieces when `strict` is set.
    [[nodiscard]] Encoding encode(std::string_view text, bool strict = false) const;
    [[nodiscard]] std::string decode(std::span<const int> ids) const;

    [[nodiscard]] int id_of(std::string_view piece) const;
    [[nodiscard]] const std::string& piece(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(vocab_.size()); }
    [[nodiscard]] const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

    /// Splits text into pieces without looking anything up.
    static std::vector<std::pair<std::string, CharSpan>> pieces(std::string_view text);

private:
    void add(const std::string& piece);

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace ticktack
