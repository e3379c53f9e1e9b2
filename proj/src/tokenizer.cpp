// SPDX-License-Identifier: Apache-2.0

#include "ticktack/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ticktack/error.hpp"

namespace ticktack {

Tokenizer::Tokenizer() {
    add("<unk>");
    add("<bos>");
    for (char c = '0'; c <= '9'; ++c) add(std::string(1, c));
}

void Tokenizer::add(const std::string& piece) {
    if (index_.contains(piece)) return;
    index_.emplace(piece, static_cast<int>(vocab_.size()));
    vocab_.push_back(piece);
}

std::vector<std::pair<std::string, CharSpan>> Tokenizer::pieces(std::string_view text) {
    std::vector<std::pair<std::string, CharSpan>> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c >= 0x80 || (c < 0x20 && !std::isspace(c)) || c == 0x7f) {
            throw Error(ErrorCode::TokenizationFailure,
                        "unsupported byte at offset " + std::to_string(i));
        }
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalpha(c)) {
            std::size_t j = i;
            while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(std::string(text.substr(i, j - i)), CharSpan{i, j});
            i = j;
        } else {
            out.emplace_back(std::string(1, text[i]), CharSpan{i, i + 1});
            ++i;
        }
    }
    return out;
}

Tokenizer Tokenizer::build(std::span<const std::string> texts) {
    std::set<std::string> seen;
    for (const auto& t : texts) {
        for (auto& [p, span] : pieces(t)) seen.insert(std::move(p));
    }
    Tokenizer tok;
    for (const auto& p : seen) tok.add(p);
    return tok;
}

Tokenizer Tokenizer::from_vocabulary(std::vector<std::string> vocab) {
    if (vocab.size() < 2 || vocab[0] != "<unk>" || vocab[1] != "<bos>") {
        throw Error(ErrorCode::ParseError, "vocabulary must start with <unk>, <bos>");
    }
    Tokenizer tok;
    tok.vocab_.clear();
    tok.index_.clear();
    for (auto& p : vocab) tok.add(p);
    return tok;
}

int Tokenizer::id_of(std::string_view piece) const {
    auto it = index_.find(std::string(piece));
    return it == index_.end() ? kUnk : it->second;
}

Encoding Tokenizer::encode(std::string_view text, bool strict) const {
    Encoding enc;
    enc.ids.push_back(kBos);
    enc.spans.push_back({0, 0});
    for (auto& [p, span] : pieces(text)) {
        const int id = id_of(p);
        if (id == kUnk && strict) {
            throw Error(ErrorCode::TokenizationFailure, "out-of-vocabulary piece '" + p + "'");
        }
        enc.ids.push_back(id);
        enc.spans.push_back(span);
    }
    return enc;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kBos) continue;
        const auto& p = piece(id);
        const bool word = !p.empty() && std::isalpha(static_cast<unsigned char>(p[0]));
        const bool digit_after_word = !p.empty() && std::isdigit(static_cast<unsigned char>(p[0])) &&
                                      !out.empty() && std::isalpha(static_cast<unsigned char>(out.back()));
        if (!out.empty() && (word || digit_after_word)) out.push_back(' ');
        out += p;
    }
    return out;
}

}  // namespace ticktack
