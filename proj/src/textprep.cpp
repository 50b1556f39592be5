#include "goemo/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <unordered_set>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "goemo/corpus.hpp"
#include "goemo/error.hpp"

namespace goemo::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;
constexpr char32_t kZeroWidthJoiner = 0x200D;

constexpr std::array<std::string_view, 2> kPlaceholders = {kNamePlaceholder, kReligionPlaceholder};

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Decodes one code point starting at s[i]; advances i. Ill-formed
// sequences decode to U+FFFD.
char32_t decode_one(std::string_view s, std::size_t& i) {
    UChar32 cp;
    U8_NEXT(s.data(), i, s.size(), cp);
    return cp < 0 ? kReplacement : static_cast<char32_t>(cp);
}

bool is_emoji_modifier(char32_t cp) {
    const auto c = static_cast<UChar32>(cp);
    return cp == 0xFE0F || cp == 0xFE0E || cp == 0x20E3 || u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) ||
           (cp >= 0xE0020 && cp <= 0xE007F);
}

bool is_regional_indicator(char32_t cp) {
    return u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_REGIONAL_INDICATOR);
}

// Returns the placeholder (canonical spelling) starting at s[i], with its
// source length, or an empty view.
std::pair<std::string_view, std::size_t> placeholder_at(std::string_view s, std::size_t i) {
    const auto rest = s.substr(i);
    for (auto p : kPlaceholders) {
        if (rest.starts_with(p)) return {p, p.size()};
    }
    if (rest.starts_with(kReligionVariant)) return {kReligionPlaceholder, kReligionVariant.size()};
    return {{}, 0};
}

void emit_word(std::string_view word, std::vector<std::string>& out) {
    // Peel punctuation off both ends, one code point per token.
    std::vector<std::pair<std::size_t, std::size_t>> cps;  // (offset, length)
    for (std::size_t i = 0; i < word.size();) {
        const std::size_t start = i;
        decode_one(word, i);
        cps.emplace_back(start, i - start);
    }
    auto cp_at = [&](std::size_t k) {
        std::size_t i = cps[k].first;
        return decode_one(word, i);
    };
    std::size_t lo = 0;
    std::size_t hi = cps.size();
    while (lo < hi && is_punctuation(cp_at(lo))) ++lo;
    std::size_t trail = hi;
    while (trail > lo && is_punctuation(cp_at(trail - 1))) --trail;
    for (std::size_t k = 0; k < lo; ++k) out.emplace_back(word.substr(cps[k].first, cps[k].second));
    if (lo < trail) {
        const std::size_t begin = cps[lo].first;
        const std::size_t end = cps[trail - 1].first + cps[trail - 1].second;
        out.emplace_back(word.substr(begin, end - begin));
    }
    for (std::size_t k = trail; k < hi; ++k) out.emplace_back(word.substr(cps[k].first, cps[k].second));
}

void tokenize_chunk(std::string_view chunk, std::vector<std::string>& out) {
    std::size_t word_begin = 0;
    std::size_t i = 0;
    auto flush_word = [&](std::size_t end) {
        if (end > word_begin) emit_word(chunk.substr(word_begin, end - word_begin), out);
    };
    while (i < chunk.size()) {
        if (auto [ph, len] = placeholder_at(chunk, i); len > 0) {
            flush_word(i);
            out.emplace_back(ph);
            i += len;
            word_begin = i;
            continue;
        }
        std::size_t next = i;
        const char32_t cp = decode_one(chunk, next);
        if (!is_emoji(cp)) {
            i = next;
            continue;
        }
        flush_word(i);
        const std::size_t start = i;
        i = next;
        bool flag_open = is_regional_indicator(cp);
        while (i < chunk.size()) {
            std::size_t j = i;
            const char32_t c = decode_one(chunk, j);
            if (is_emoji_modifier(c)) {
                i = j;
            } else if (c == kZeroWidthJoiner && j < chunk.size()) {
                std::size_t k = j;
                const char32_t joined = decode_one(chunk, k);
                if (!is_emoji(joined)) break;
                i = k;
            } else if (flag_open && is_regional_indicator(c)) {
                flag_open = false;
                i = j;
            } else {
                break;
            }
        }
        out.emplace_back(chunk.substr(start, i - start));
        word_begin = i;
    }
    flush_word(chunk.size());
}

}  // namespace

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size();) {
        decode_one(s, i);
        ++n;
    }
    return n;
}

std::vector<char32_t> utf8_decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) out.push_back(decode_one(s, i));
    return out;
}

void utf8_append(std::string& out, char32_t cp) {
    char buf[U8_MAX_LENGTH];
    std::size_t n = 0;
    U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(cp));
    out.append(buf, n);
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ascii_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_ascii_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

bool is_emoji(char32_t cp) {
    const auto c = static_cast<UChar32>(cp);
    return u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) || u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR);
}

// Unicode punctuation plus math, currency and modifier symbols, which
// covers every printable ASCII character that is not a letter or digit.
bool is_punctuation(char32_t cp) {
    if (is_emoji(cp)) return false;
    const auto c = static_cast<UChar32>(cp);
    if (u_ispunct(c)) return true;
    const auto mask = U_GET_GC_MASK(c);
    return (mask & (U_GC_SM_MASK | U_GC_SC_MASK | U_GC_SK_MASK)) != 0;
}

std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '[') {
            if (auto [ph, len] = placeholder_at(text, i); len > 0) {
                out += ph;
                i += len;
                continue;
            }
        }
        const auto b = static_cast<unsigned char>(text[i]);
        if (b < 0x80) {
            out.push_back(static_cast<char>(b >= 'A' && b <= 'Z' ? b + 32 : b));
            ++i;
            continue;
        }
        const std::size_t start = i;
        const char32_t cp = decode_one(text, i);
        const auto lower = static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
        if (lower == cp && cp != kReplacement) {
            out.append(text.substr(start, i - start));
        } else {
            utf8_append(out, lower);
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto chunk : split_whitespace(text)) tokenize_chunk(chunk, out);
    return out;
}

std::vector<std::string> preprocess(std::string_view text) { return tokenize(normalize(text)); }

TokenVocabulary::TokenVocabulary() {
    add(std::string(kUnknownToken));
    for (auto p : kPlaceholders) add(std::string(p));
}

std::size_t TokenVocabulary::add(const std::string& token) {
    if (token.empty()) throw ValidationError("empty token cannot enter the vocabulary");
    auto [it, inserted] = index_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
}

bool TokenVocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::size_t TokenVocabulary::index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_index() : it->second;
}

bool TokenVocabulary::is_special(std::string_view token) const {
    return token == kUnknownToken ||
           std::find(kPlaceholders.begin(), kPlaceholders.end(), token) != kPlaceholders.end();
}

std::vector<std::size_t> TokenVocabulary::encode(const TokenSequence& seq) const {
    std::vector<std::size_t> ids;
    ids.reserve(seq.size());
    for (const auto& t : seq) ids.push_back(index_of(t));
    return ids;
}

void TokenVocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write vocabulary: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

TokenVocabulary TokenVocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read vocabulary: " + path);
    TokenVocabulary vocab;
    vocab.tokens_.clear();
    vocab.index_.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) throw ParseError("empty token in vocabulary file", lineno);
        if (vocab.index_.contains(line)) throw ParseError("duplicate token '" + line + "'", lineno);
        vocab.index_.emplace(line, vocab.tokens_.size());
        vocab.tokens_.push_back(line);
    }
    if (vocab.tokens_.empty() || vocab.tokens_.front() != kUnknownToken)
        throw ValidationError("vocabulary must start with " + std::string(kUnknownToken));
    for (auto p : kPlaceholders) {
        if (!vocab.contains(p)) throw ValidationError("vocabulary lacks special token " + std::string(p));
    }
    return vocab;
}

TokenVocabulary build_vocab(std::span<const TokenSequence> docs, std::size_t min_df, std::size_t max_size) {
    if (min_df < 1) throw ValidationError("min_df must be >= 1");
    if (docs.empty()) throw ValidationError("cannot build a vocabulary from an empty training corpus");
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
        std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
        for (auto t : seen) ++df[std::string(t)];
    }
    TokenVocabulary vocab;
    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [tok, n] : df) {
        if (n >= min_df && !vocab.is_special(tok)) ranked.emplace_back(tok, n);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > max_size) ranked.resize(max_size);
    for (const auto& [tok, n] : ranked) vocab.add(tok);
    return vocab;
}

TokenVocabulary build_vocab(std::span<const Corpus* const> corpora, std::size_t min_df, std::size_t max_size) {
    std::vector<TokenSequence> docs;
    for (const Corpus* c : corpora) {
        for (const auto& ex : c->examples()) docs.push_back(preprocess(ex.text));
    }
    return build_vocab(std::span<const TokenSequence>(docs), min_df, max_size);
}

}  // namespace goemo::text
