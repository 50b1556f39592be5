#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace goemo {

class Corpus;

namespace text {

// Anonymization placeholders used by the GoEmotions release.
inline constexpr std::string_view kNamePlaceholder = "[NAME]";
inline constexpr std::string_view kReligionPlaceholder = "[RELIGION]";
// Alternate spelling that also occurs in the wild; canonicalized to [RELIGION].
inline constexpr std::string_view kReligionVariant = "[RELEGION]";
inline constexpr std::string_view kUnknownToken = "<unk>";

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<char32_t> utf8_decode(std::string_view s);
void utf8_append(std::string& out, char32_t cp);

/// Splits on ASCII whitespace; no empty pieces.
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Extended_Pictographic or a regional indicator.
bool is_emoji(char32_t cp);
/// Punctuation or a math, currency or modifier symbol; never an emoji.
bool is_punctuation(char32_t cp);

/// Lowercases every cased letter. Placeholders keep their bracketed upper
/// case, and the [RELEGION] spelling is rewritten to [RELIGION]. Emoji,
/// punctuation, and all words are kept.
std::string normalize(std::string_view text);

/// Word-level tokenizer applied to normalized text.
///
/// Rules, in order: split on whitespace; emit placeholders whole; emit each
/// emoji (with any modifiers, variation selectors and ZWJ continuations) as
/// one token; peel leading and trailing punctuation off each word one
/// character per token. Internal punctuation such as the apostrophe in
/// "that's" stays inside the word.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize(normalize(text)).
std::vector<std::string> preprocess(std::string_view text);

using TokenSequence = std::vector<std::string>;

/// Dense token index. Index 0 is <unk>, followed by the placeholder tokens,
/// followed by corpus tokens in decreasing document frequency (ties in
/// byte order).
class TokenVocabulary {
   public:
    static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

    TokenVocabulary();

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t unk_index() const noexcept { return 0; }
    bool contains(std::string_view token) const;
    /// Index of the token, or unk_index() when absent.
    std::size_t index_of(std::string_view token) const;
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    bool is_special(std::string_view token) const;

    std::vector<std::size_t> encode(const TokenSequence& seq) const;

    /// One token per line in index order.
    void save(const std::string& path) const;
    static TokenVocabulary load(const std::string& path);

    /// Appends a token if absent; returns its index.
    std::size_t add(const std::string& token);

   private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Builds a vocabulary from training corpora. Tokens need document frequency
/// >= min_df; at most max_size corpus tokens are kept on top of the reserved
/// entries.
TokenVocabulary build_vocab(std::span<const Corpus* const> corpora, std::size_t min_df = 2,
                            std::size_t max_size = 50000);

/// Same, over pre-tokenized documents.
TokenVocabulary build_vocab(std::span<const TokenSequence> docs, std::size_t min_df = 2,
                            std::size_t max_size = 50000);

}  // namespace text
}  // namespace goemo
