#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "goemo/error.hpp"
#include "goemo/eval.hpp"
#include "metric_oracle.hpp"
#include "support.hpp"

using namespace goemo;
using Catch::Matchers::WithinAbs;

namespace {

BinaryMatrix random_binary(Eigen::Index n, Eigen::Index k, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    BinaryMatrix m(n, k);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(rng);
    return m;
}

BinaryMatrix rows(std::initializer_list<std::initializer_list<int>> r) {
    BinaryMatrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (int v : row) m(i, j++) = static_cast<std::uint8_t>(v);
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("every metric equals the rational oracle bit for bit") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dn(1, 20), dk(1, 6);
    std::uniform_real_distribution<double> dp(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = dn(rng), k = dk(rng);
        const BinaryMatrix gold = random_binary(n, k, dp(rng), rng);
        // Mix of independent noise and near-copies of gold.
        BinaryMatrix pred = random_binary(n, k, dp(rng), rng);
        if (trial % 3 == 0) {
            pred = gold;
            std::uniform_int_distribution<Eigen::Index> cell(0, n * k - 1);
            for (int f = 0; f < 2; ++f) pred.data()[cell(rng)] ^= 1;
        }
        const auto o = testing::brute_force_metrics(pred, gold);
        INFO("trial " << trial);
        REQUIRE(subset_accuracy(pred, gold) == o.subset_accuracy);
        REQUIRE(hamming_loss(pred, gold) == o.hamming_loss);
        const auto prf = per_label_prf(pred, gold);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& a = prf[static_cast<std::size_t>(j)];
            const auto& b = o.labels[static_cast<std::size_t>(j)];
            REQUIRE(a.precision == b.precision);
            REQUIRE(a.recall == b.recall);
            REQUIRE(a.f1 == b.f1);
            REQUIRE(a.support == b.support);
        }
        const auto mm = micro_macro(pred, gold);
        REQUIRE(mm.micro_f1 == o.micro_f1);
        REQUIRE(mm.macro_f1 == o.macro_f1);
    }
}

TEST_CASE("subset accuracy and Hamming loss by hand") {
    const BinaryMatrix gold = rows({{1, 0, 0, 1}, {0, 1, 0, 0}});
    CHECK(subset_accuracy(rows({{1, 0, 0, 1}, {0, 1, 1, 0}}), gold) == 0.5);
    CHECK(subset_accuracy(rows({{0, 0, 0, 1}, {0, 1, 1, 0}}), gold) == 0.0);
    CHECK(hamming_loss(rows({{0, 0, 0, 1}, {0, 1, 1, 1}}), gold) == 0.375);
    CHECK(subset_accuracy(gold, gold) == 1.0);
    CHECK(hamming_loss(gold, gold) == 0.0);
    const BinaryMatrix comp = gold.unaryExpr([](std::uint8_t v) { return static_cast<std::uint8_t>(1 - v); });
    CHECK(subset_accuracy(comp, gold) == 0.0);
    CHECK(hamming_loss(comp, gold) == 1.0);
    CHECK_THROWS_AS(hamming_loss(gold, BinaryMatrix::Zero(2, 3)), ShapeError);
    CHECK_THROWS_AS(subset_accuracy(gold, BinaryMatrix::Zero(3, 4)), ShapeError);
}

TEST_CASE("exact subset accuracy is equivalent to zero Hamming loss") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 300; ++t) {
        const BinaryMatrix g = random_binary(4, 3, 0.5, rng);
        const BinaryMatrix p = t % 2 ? g : random_binary(4, 3, 0.5, rng);
        CHECK((subset_accuracy(p, g) == 1.0) == (hamming_loss(p, g) == 0.0));
    }
}

TEST_CASE("published gratitude row") {
    // P and R are printed to three places; each rounding moves F1 by up to
    // about 2.7e-4, so the rates alone pin F1 only to within 1e-3.
    CHECK_THAT(f1_from_rates(0.843, 0.915), WithinAbs(0.877, 1e-3));
    CHECK(f1_from_rates(0.0, 0.0) == 0.0);

    // With support 352 the printed rates admit exactly one count triple,
    // and its F1 rounds to the printed value.
    int found = 0;
    for (long tp = 0; tp <= 352; ++tp) {
        for (long predicted = tp; predicted <= 2000; ++predicted) {
            const double p = static_cast<double>(tp) / static_cast<double>(predicted);
            const double r = static_cast<double>(tp) / 352.0;
            if (std::abs(p - 0.843) >= 5e-4 || std::abs(r - 0.915) >= 5e-4) continue;
            BinaryMatrix pred = BinaryMatrix::Zero(352 + predicted - tp, 1), gold = pred;
            gold.topRows(352).setOnes();
            pred.topRows(tp).setOnes();
            pred.bottomRows(predicted - tp).setOnes();
            const LabelPrf prf = per_label_prf(pred, gold)[0];
            CHECK(tp == 322);
            CHECK(predicted == 382);
            CHECK(prf.support == 352);
            CHECK_THAT(prf.f1, WithinAbs(0.877, 5e-4));
            ++found;
        }
    }
    CHECK(found == 1);
}

TEST_CASE("zero-denominator and perfect-label conventions") {
    const BinaryMatrix gold = rows({{1, 0}, {1, 0}, {0, 0}});
    const auto prf = per_label_prf(gold, gold);
    CHECK(prf[0].precision == 1.0);
    CHECK(prf[0].recall == 1.0);
    CHECK(prf[0].f1 == 1.0);
    CHECK(prf[0].support == 2);
    CHECK(prf[1].precision == 0.0);
    CHECK(prf[1].recall == 0.0);
    CHECK(prf[1].f1 == 0.0);
    CHECK(prf[1].support == 0);
}

TEST_CASE("micro and macro averages") {
    std::mt19937_64 rng(6);
    const BinaryMatrix g1 = random_binary(15, 1, 0.4, rng), p1 = random_binary(15, 1, 0.5, rng);
    const auto single = micro_macro(p1, g1);
    CHECK(single.micro_f1 == single.macro_f1);
    CHECK(single.micro_f1 == per_label_prf(p1, g1)[0].f1);

    // Label 0 is perfect on many examples; label 1 is always missed once.
    BinaryMatrix gold = BinaryMatrix::Zero(10, 2), pred = BinaryMatrix::Zero(10, 2);
    for (Eigen::Index i = 0; i < 9; ++i) gold(i, 0) = pred(i, 0) = 1;
    gold(9, 1) = 1;
    const auto mm = micro_macro(pred, gold);
    CHECK(mm.macro_f1 == 0.5);
    CHECK(mm.micro_f1 == 18.0 / 19.0);
    CHECK(micro_macro(gold, gold).micro_f1 == 1.0);
    CHECK(micro_macro(gold, gold).macro_f1 == 1.0);
}

TEST_CASE("averages are invariant under label permutation") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        const BinaryMatrix g = random_binary(12, 5, 0.3, rng), p = random_binary(12, 5, 0.3, rng);
        std::vector<int> perm(5);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        BinaryMatrix gp(12, 5), pp(12, 5);
        for (int j = 0; j < 5; ++j) {
            gp.col(j) = g.col(perm[static_cast<std::size_t>(j)]);
            pp.col(j) = p.col(perm[static_cast<std::size_t>(j)]);
        }
        const auto a = micro_macro(p, g), b = micro_macro(pp, gp);
        CHECK(a.micro_f1 == b.micro_f1);
        CHECK(a.macro_f1 == b.macro_f1);
        for (const auto& l : per_label_prf(p, g)) CHECK(l.f1 <= std::max(l.precision, l.recall));
    }
}

TEST_CASE("macro exclusions") {
    const BinaryMatrix gold = rows({{1, 0, 1}, {0, 0, 1}});
    const BinaryMatrix pred = rows({{1, 0, 0}, {0, 0, 1}});
    const std::vector<std::size_t> ex{1};
    const auto counts = label_counts(pred, gold);
    CHECK(macro_f1_from_counts(counts, ex) == micro_macro(pred, gold, ex).macro_f1);
    // (1 + 2/3) / 2
    CHECK(micro_macro(pred, gold, ex).macro_f1 == 5.0 / 6.0);
}

TEST_CASE("binarize uses a closed threshold and never forces labels") {
    Matrix p(2, 3);
    p << 0.5, 0.49, 0.9, 0.4, 0.4, 0.4;
    const BinaryMatrix b = binarize(p, Thresholds::uniform(3));
    CHECK(b == rows({{1, 0, 1}, {0, 0, 0}}));
    CHECK_THROWS_AS(binarize(p, Thresholds::uniform(2)), ShapeError);
    CHECK_THROWS_AS(Thresholds::uniform(3, 1.0), ValidationError);
    CHECK_THROWS_AS(Thresholds::uniform(3, 0.0), ValidationError);
}

TEST_CASE("lowering one threshold only adds positives for that label") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix p(30, 4);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    std::vector<double> tau{0.5, 0.5, 0.5, 0.5};
    BinaryMatrix prev = binarize(p, Thresholds(tau));
    for (double t = 0.45; t > 0.0; t -= 0.05) {
        tau[2] = t;
        const BinaryMatrix cur = binarize(p, Thresholds(tau));
        for (Eigen::Index j = 0; j < 4; ++j) {
            if (j == 2) CHECK((cur.col(j).cast<int>() - prev.col(j).cast<int>()).minCoeff() >= 0);
            else CHECK(cur.col(j) == prev.col(j));
        }
        prev = cur;
    }
}

TEST_CASE("threshold tuning") {
    SECTION("single grid value") {
        std::mt19937_64 rng(9);
        Matrix p = Matrix::Random(20, 28).cwiseAbs();
        const std::vector<double> grid{0.5};
        const Thresholds t = tune_thresholds(p, random_binary(20, 28, 0.2, rng), grid);
        CHECK(t.values() == std::vector<double>(28, 0.5));
    }
    SECTION("rare label clustered below the default") {
        Matrix p = Matrix::Constant(40, 2, 0.1);
        BinaryMatrix g = BinaryMatrix::Zero(40, 2);
        for (Eigen::Index i = 0; i < 4; ++i) {
            g(i, 1) = 1;
            p(i, 1) = 0.3;
        }
        for (Eigen::Index i = 4; i < 40; ++i) p(i, 1) = 0.2;
        for (Eigen::Index i = 0; i < 20; ++i) {
            g(i, 0) = 1;
            p(i, 0) = 0.8;
        }
        const auto grid = default_threshold_grid();
        const Thresholds t = tune_thresholds(p, g, grid);
        CHECK(t[1] <= 0.3);
        CHECK(t[1] > 0.2);
        const double before = per_label_prf(binarize(p, Thresholds::uniform(2)), g)[1].f1;
        const double after = per_label_prf(binarize(p, t), g)[1].f1;
        CHECK(before == 0.0);
        CHECK(after == 1.0);
    }
    SECTION("labels without positives stay near the default") {
        const Matrix p = Matrix::Constant(5, 1, 0.2);
        const BinaryMatrix g = BinaryMatrix::Zero(5, 1);
        const auto grid = default_threshold_grid();
        CHECK_THAT(tune_thresholds(p, g, grid)[0], WithinAbs(0.5, 1e-12));
        CHECK(tune_thresholds(p, g, std::vector<double>{0.1, 0.7})[0] == 0.7);
    }
    SECTION("ties go to the smallest threshold") {
        Matrix p(2, 1);
        p << 0.9, 0.05;
        BinaryMatrix g(2, 1);
        g << 1, 0;
        const auto grid = default_threshold_grid();
        CHECK_THAT(tune_thresholds(p, g, grid)[0], WithinAbs(0.1, 1e-12));
    }
    SECTION("never worse than the default on the tuning data") {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            Matrix p(50, 6);
            BinaryMatrix g = random_binary(50, 6, 0.15, rng);
            for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = 0.6 * u(rng) + 0.35 * g.data()[i];
            const auto grid = default_threshold_grid();
            const Thresholds t = tune_thresholds(p, g, grid, trial % 2 ? 3 : 1);
            CHECK(micro_macro(binarize(p, t), g).macro_f1 >= micro_macro(binarize(p, Thresholds::uniform(6)), g).macro_f1);
            CHECK(t.values() == tune_thresholds(p, g, grid, 1).values());
        }
    }
    SECTION("bad grids") {
        const Matrix p = Matrix::Constant(2, 1, 0.5);
        const BinaryMatrix g = BinaryMatrix::Ones(2, 1);
        CHECK_THROWS(tune_thresholds(p, g, std::vector<double>{}));
        CHECK_THROWS(tune_thresholds(p, g, std::vector<double>{1.5}));
    }
    auto grid = default_threshold_grid();
    CHECK(grid.size() == 19);
    CHECK_THAT(grid.front(), WithinAbs(0.05, 1e-12));
    CHECK_THAT(grid.back(), WithinAbs(0.95, 1e-12));
}

TEST_CASE("thresholds file round-trip") {
    testing::TempDir dir;
    const auto vocab = LabelVocabulary::goemotions();
    std::vector<double> tau(28);
    for (std::size_t k = 0; k < 28; ++k) tau[k] = 0.05 + 0.03 * static_cast<double>(k);
    Thresholds(tau).save(dir.file("t.tsv"), vocab);
    CHECK(Thresholds::load(dir.file("t.tsv"), vocab).values() == tau);
    testing::write_text(dir.file("partial.tsv"), "admiration\t0.4\n");
    CHECK_THROWS(Thresholds::load(dir.file("partial.tsv"), vocab));
}

TEST_CASE("reports") {
    const auto vocab = LabelVocabulary::goemotions();
    std::mt19937_64 rng(11);
    BinaryMatrix gold = random_binary(30, 28, 0.1, rng);
    for (Eigen::Index k = 0; k < 28; ++k) gold(k, k) = 1;
    const MetricsReport perfect = build_report(gold, gold, vocab);
    CHECK(perfect.subset_accuracy == 1.0);
    CHECK(perfect.micro_f1 == 1.0);
    CHECK(perfect.hamming_loss == 0.0);
    const BinaryMatrix pred = random_binary(30, 28, 0.1, rng);
    const MetricsReport r = build_report(pred, gold, vocab);
    CHECK(r.per_label.size() == 28);
    CHECK(r.labels == vocab.names());
    CHECK(r.num_examples == 30);

    const std::string tsv = render_report(r, ReportFormat::kTsv);
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 1 + 28 + 5);
    CHECK(parse_report_tsv(tsv) == r);
    const std::vector<std::size_t> ex{27};
    const MetricsReport rx = build_report(pred, gold, vocab, ex);
    CHECK(rx.macro_excluded == std::vector<std::string>{"neutral"});
    CHECK(parse_report_tsv(render_report(rx, ReportFormat::kTsv)) == rx);

    const std::string text = render_report(r, ReportFormat::kText);
    CHECK(text.find("gratitude") != std::string::npos);
    CHECK(text.find("Hamming loss") != std::string::npos);
    const std::string json = render_report(r, ReportFormat::kJson);
    CHECK(json.find("\"aggregates\"") != std::string::npos);
    CHECK(parse_report_format("tsv") == ReportFormat::kTsv);
    CHECK_THROWS(parse_report_format("xml"));
    CHECK(render_aggregates(perfect).find("1\t1\t1\t0") != std::string::npos);
}

TEST_CASE("prediction files") {
    testing::TempDir dir;
    PredictionMatrix pm;
    pm.ids = {"x", "y"};
    pm.probs = Matrix::Random(2, 28).cwiseAbs();
    pm.probs(0, 0) = 0.1;
    write_predictions(dir.file("p.tsv"), pm);
    const PredictionMatrix back = read_predictions(dir.file("p.tsv"));
    CHECK(back.ids == pm.ids);
    CHECK(back.probs == pm.probs);
    CHECK_THROWS_AS(read_predictions(dir.file("p.tsv"), 5), ShapeError);
    testing::write_text(dir.file("bad.tsv"), "x\t0.5,1.5\n");
    CHECK_THROWS(read_predictions(dir.file("bad.tsv"), 2));
    pm.ids = {"x", "x"};
    CHECK_THROWS(pm.validate());
}

TEST_CASE("gold labels follow prediction order") {
    const auto vocab = LabelVocabulary::goemotions();
    const Corpus c({Example::make("a", "one", LabelSet({1})), Example::make("b", "two", LabelSet({2, 27}))}, Split::kTest,
                   vocab);
    const std::vector<std::string> ids{"b", "a"};
    const BinaryMatrix g = aligned_gold(c, ids);
    CHECK(g(0, 2) == 1);
    CHECK(g(0, 27) == 1);
    CHECK(g(1, 1) == 1);
    CHECK(g.cast<int>().sum() == 3);
    const std::vector<std::string> short_ids{"a"};
    CHECK_THROWS_AS(aligned_gold(c, short_ids), ShapeError);
    const std::vector<std::string> unknown{"a", "zz"};
    CHECK_THROWS_AS(aligned_gold(c, unknown), ValidationError);
}
