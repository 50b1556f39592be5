#include <catch_amalgamated.hpp>

#include <cctype>

#include "goemo/corpus.hpp"
#include "goemo/textprep.hpp"

using namespace goemo;
using text::TokenSequence;

namespace {

TokenSequence toks(std::initializer_list<const char*> items) { return {items.begin(), items.end()}; }

std::string alnum_only(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c))) out += c;
    return out;
}

}  // namespace

TEST_CASE("normalize lowercases words and keeps emoji") {
    CHECK(text::normalize("WOW That's GREAT 🎉") == "wow that's great 🎉");
    CHECK(text::normalize("") == "");
}

TEST_CASE("lowercasing covers non-Latin scripts") {
    CHECK(text::normalize("ÉCOLE Straße ΔΕΛΤΑ МОСКВА") == "école straße δελτα москва");
}

TEST_CASE("normalize leaves placeholders alone") {
    CHECK(text::normalize("[NAME] helped me") == "[NAME] helped me");
    CHECK(text::normalize("Thank [RELIGION] and [NAME]") == "thank [RELIGION] and [NAME]");
    CHECK(text::normalize("praise [RELEGION]") == "praise [RELIGION]");
}

TEST_CASE("tokenize peels surrounding punctuation") {
    CHECK(text::tokenize("help, hope!") == toks({"help", ",", "hope", "!"}));
    CHECK(text::tokenize("\"really?!\"") == toks({"\"", "really", "?", "!", "\""}));
    CHECK(text::tokenize("that's fine") == toks({"that's", "fine"}));
}

TEST_CASE("tokenize keeps placeholders atomic") {
    CHECK(text::tokenize("[RELIGION] is kind") == toks({"[RELIGION]", "is", "kind"}));
    CHECK(text::tokenize("[NAME], hi") == toks({"[NAME]", ",", "hi"}));
}

TEST_CASE("each emoji is its own token") {
    CHECK(text::tokenize("so excited 🎉") == toks({"so", "excited", "🎉"}));
    CHECK(text::tokenize("yes🎉🎉") == toks({"yes", "🎉", "🎉"}));
    // skin-tone modifier stays with its base
    CHECK(text::tokenize("ok 👍🏽") == toks({"ok", "👍🏽"}));
}

TEST_CASE("flags, joined sequences and non-ASCII punctuation") {
    CHECK(text::tokenize("go 🇫🇷!") == toks({"go", "🇫🇷", "!"}));
    CHECK(text::tokenize("👨‍👩‍👧 family") == toks({"👨‍👩‍👧", "family"}));
    CHECK(text::tokenize("«¿qué?»") == toks({"«", "¿", "qué", "?", "»"}));
    CHECK(text::tokenize("5€") == toks({"5", "€"}));
    CHECK(text::is_emoji(U'\u2764'));
    CHECK_FALSE(text::is_emoji(U'#'));
    CHECK_FALSE(text::is_punctuation(U'\u2764'));
}

TEST_CASE("stop words survive preprocessing") {
    CHECK(text::preprocess("The cat is on the mat") == toks({"the", "cat", "is", "on", "the", "mat"}));
}

TEST_CASE("tokenization is deterministic and loses no alphanumerics") {
    const char* samples[] = {"Hello, [NAME]! Isn't it...great?", "(yes) no; maybe", "--wow--", "a.b.c", "🎉x🎉",
                             "  spaced   out  ", "12% of 3,000"};
    for (const char* s : samples) {
        const auto a = text::preprocess(s);
        CHECK(a == text::preprocess(s));
        std::string joined;
        for (const auto& t : a) joined += t;
        CHECK(alnum_only(joined) == alnum_only(text::normalize(s)));
    }
}

TEST_CASE("utf8 helpers count scalar values") {
    CHECK(text::utf8_length("héllo🎉") == 6);
    CHECK(text::utf8_decode("é").size() == 1);
    CHECK(text::utf8_decode("\xff").front() == U'\xFFFD');
}

TEST_CASE("build_vocab applies min_df") {
    const std::vector<TokenSequence> docs{toks({"a", "b"}), toks({"a", "c"})};
    const auto v = text::build_vocab(docs, 2);
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("b"));
    CHECK_FALSE(v.contains("c"));
    CHECK(v.contains("[NAME]"));
    CHECK(v.contains("[RELIGION]"));
    CHECK(v.index_of("b") == v.unk_index());
}

TEST_CASE("build_vocab with min_df 1 keeps every token") {
    const std::vector<TokenSequence> docs{toks({"x", "y", "y"}), toks({"z"})};
    const auto v = text::build_vocab(docs, 1, text::TokenVocabulary::kUnbounded);
    for (const char* t : {"x", "y", "z"}) CHECK(v.contains(t));
}

TEST_CASE("vocabulary indices are dense and ordered by document frequency") {
    const std::vector<TokenSequence> docs{toks({"b", "a"}), toks({"a"}), toks({"c", "b", "a"})};
    const auto v = text::build_vocab(docs, 1);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index_of(v.token(i)) == i);
    CHECK(v.index_of("a") < v.index_of("b"));
    CHECK(v.index_of("b") < v.index_of("c"));
    CHECK(v.encode(toks({"a", "zzz"})) == std::vector<std::size_t>{v.index_of("a"), v.unk_index()});
}

TEST_CASE("max_size caps corpus tokens only") {
    const std::vector<TokenSequence> docs{toks({"a", "b", "c"}), toks({"a", "b"}), toks({"a"})};
    const auto v = text::build_vocab(docs, 1, 2);
    CHECK(v.contains("a"));
    CHECK(v.contains("b"));
    CHECK_FALSE(v.contains("c"));
    CHECK(v.contains("[NAME]"));
}
