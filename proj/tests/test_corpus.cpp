#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include <json.hpp>

#include "goemo/corpus.hpp"
#include "goemo/error.hpp"
#include "support.hpp"

using namespace goemo;
using Catch::Matchers::WithinAbs;

namespace {

Corpus parse(const std::string& tsv, Split split = Split::kTrain) {
    std::istringstream in(tsv);
    return read_corpus(in, LabelVocabulary::goemotions(), split);
}

Corpus random_corpus(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> label(0, 27), count(1, 4), word(0, 9);
    const char* words[] = {"good", "bad", "ok", "[NAME]", "so", "wow!", "🎉", "why?", "sure", "fine"};
    std::ostringstream tsv;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> ls;
        for (int c = count(rng); c > 0; --c) {
            const int l = label(rng);
            if (std::find(ls.begin(), ls.end(), l) == ls.end()) ls.push_back(l);
        }
        std::string text;
        for (int w = count(rng) + 1; w > 0; --w) text += std::string(text.empty() ? "" : " ") + words[word(rng)];
        tsv << text << '\t';
        for (std::size_t j = 0; j < ls.size(); ++j) tsv << (j ? "," : "") << ls[j];
        tsv << "\tid" << i << '\n';
    }
    return parse(tsv.str());
}

}  // namespace

TEST_CASE("a data row becomes an example") {
    const Corpus c = parse("That game hurt.\t25\teew5j0j\n");
    REQUIRE(c.size() == 1);
    CHECK(c[0].labels.indices() == std::vector<int>{25});
    CHECK(c[0].word_count == 3);
    CHECK(c[0].char_length == 15);
    CHECK(c[0].id == "eew5j0j");
    CHECK(c[0].avg_word_length == Catch::Approx(13.0 / 3.0));
}

TEST_CASE("multi-label field parses to a sorted set") {
    const Corpus c = parse("x\t27,3\ta\n");
    CHECK(c[0].labels == LabelSet({3, 27}));
}

TEST_CASE("header line is skipped") {
    const Corpus c = parse("text\tlabels\tid\nhello\t0\ta\n");
    CHECK(c.size() == 1);
    CHECK(c[0].text == "hello");
}

TEST_CASE("char_length counts code points") {
    const Corpus c = parse("yay 🎉\t17\ta\n");
    CHECK(c[0].char_length == 5);
}

TEST_CASE("malformed rows are rejected") {
    CHECK_THROWS_AS(parse("only two\t1\n"), ParseError);
    CHECK_THROWS_AS(parse("x\t1,a\tid\n"), ParseError);
    CHECK_THROWS_AS(parse("x\t28\tid\n"), ValidationError);
    CHECK_THROWS_AS(parse("x\t-1\tid\n"), ValidationError);
    CHECK_THROWS_AS(parse("x\t3,3\tid\n"), ValidationError);
    CHECK_THROWS_AS(parse("x\t1\tid\ny\t2\tid\n"), ValidationError);
    CHECK_THROWS_AS(parse("x\t\tid\n"), ValidationError);
}

TEST_CASE("missing file is an input error") {
    try {
        load_corpus("/nonexistent/goemo/train.tsv", LabelVocabulary::goemotions(), "train");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.exit_code() == ExitCode::kInputError);
    }
}

TEST_CASE("ingest then serialize round-trips every example") {
    const Corpus c = random_corpus(7, 200);
    std::ostringstream out;
    c.write_tsv(out);
    const Corpus back = parse(out.str());
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back[i].text == c[i].text);
        CHECK(back[i].labels == c[i].labels);
        CHECK(back[i].id == c[i].id);
    }
}

TEST_CASE("label counts sum to the label occurrences") {
    const Corpus c = random_corpus(11, 300);
    const CorpusStats s = compute_stats(c);
    std::size_t occurrences = 0, counted = 0;
    for (const auto& ex : c.examples()) {
        occurrences += ex.labels.size();
        CHECK(ex.labels.size() >= 1);
        CHECK(ex.labels.size() <= kNumLabels);
    }
    for (auto n : s.per_label_counts) counted += n;
    CHECK(counted == occurrences);
    std::size_t binned = 0;
    for (const auto& [n, bin] : s.label_count_histogram) {
        binned += bin.count;
        CHECK_THAT(bin.percentage, WithinAbs(100.0 * static_cast<double>(bin.count) / 300.0, 1e-9));
    }
    CHECK(binned == 300);
}

TEST_CASE("two single-label examples give one histogram bin") {
    const CorpusStats s = compute_stats(parse("a\t1\tx\nb c\t2\ty\n"));
    CHECK(s.total == 2);
    REQUIRE(s.label_count_histogram.size() == 1);
    CHECK(s.label_count_histogram.at(1).count == 2);
    CHECK(s.label_count_histogram.at(1).percentage == 100.0);
    CHECK(s.median_word_count == 1.5);
    CHECK(s.mean_char_length == 2.0);
    CHECK(s.char_length_range == std::pair<std::size_t, std::size_t>{1, 3});
}

TEST_CASE("top tokens per label") {
    const Corpus c = parse("a a b\t4\tx\nc c c\t5\ty\n");
    const auto top = top_tokens_per_label(c, 4, 10);
    REQUIRE(top.size() == 2);
    CHECK(top[0] == std::pair<std::string, std::size_t>{"a", 2});
    CHECK(top[1] == std::pair<std::string, std::size_t>{"b", 1});
}

TEST_CASE("top tokens of one label ignore other labels' examples") {
    const Corpus full = parse("joy is here\t17\ta\nsad day\t25\tb\nso much joy\t17\tc\nbad day\t25\td\n");
    const Corpus only = parse("joy is here\t17\ta\nso much joy\t17\tc\n");
    CHECK(top_tokens_per_label(full, 17, 5) == top_tokens_per_label(only, 17, 5));
}

TEST_CASE("combine keeps every example and disambiguates ids") {
    const Corpus a = parse("x\t1\tid1\n", Split::kTrain);
    const Corpus b = parse("y\t2\tid1\n", Split::kTest);
    const Corpus both = Corpus::combine({&a, &b});
    CHECK(both.size() == 2);
    CHECK(both[0].id != both[1].id);
    CHECK(compute_stats(both).total == 2);
}

TEST_CASE("stats JSON carries the documented fields") {
    const Corpus c = parse("a\t1\tx\nb c\t2,27\ty\n");
    const auto j = nlohmann::json::parse(render_stats_json(compute_stats(c), c.vocab()));
    CHECK(j["total"] == 2);
    CHECK(j["per_label_counts"]["neutral"] == 1);
    CHECK(j["per_label_counts"].size() == kNumLabels);
    CHECK(j["label_count_histogram"]["2"]["count"] == 1);
    CHECK(j["label_count_histogram"]["1"]["percentage"] == 50.0);
}

TEST_CASE("label vocabulary is the 28-label release order") {
    const auto v = LabelVocabulary::goemotions();
    CHECK(v.size() == 28);
    CHECK(v.name(0) == "admiration");
    CHECK(v.name(15) == "gratitude");
    CHECK(v.name(27) == "neutral");
    CHECK(v.index_of("grief") == 16);
    CHECK_THROWS_AS(v.index_of("boredom"), ValidationError);
}

TEST_CASE("label_matrix rejects labels beyond K") {
    const std::vector<LabelSet> sets{LabelSet({0, 5}), LabelSet({27})};
    const BinaryMatrix y = label_matrix(sets);
    CHECK(y.rows() == 2);
    CHECK(y(0, 5) == 1);
    CHECK(y.row(0).cast<int>().sum() == 2);
    CHECK_THROWS_AS(label_matrix(sets, 10), ShapeError);
}
