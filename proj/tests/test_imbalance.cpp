#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "goemo/corpus.hpp"
#include "goemo/error.hpp"
#include "goemo/imbalance.hpp"
#include "support.hpp"

using namespace goemo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_probs(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.01, 0.99);
    Matrix p(n, k);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = d(rng);
    return p;
}

BinaryMatrix random_targets(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.4);
    BinaryMatrix y(n, k);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = coin(rng) ? 1 : 0;
    return y;
}

CorpusStats counts(std::size_t total, std::vector<std::size_t> per_label) {
    CorpusStats s;
    s.total = total;
    s.per_label_counts = std::move(per_label);
    return s;
}

}  // namespace

TEST_CASE("inverse-frequency weights from the published counts") {
    std::vector<std::size_t> per(28, 1000);
    per[27] = 14219;  // neutral
    per[0] = 4130;    // admiration
    const ClassWeights w = inverse_frequency_weights(counts(58009, per));
    CHECK_THAT(w[27], WithinAbs(0.14570, 5e-6));
    CHECK_THAT(w[0], WithinAbs(0.501634, 5e-7));  // 58009 / 115640, 0.50163 to five places
    CHECK(w[27] == 58009.0 / (14219.0 * 28.0));
}

TEST_CASE("balanced counts give unit weights") {
    const ClassWeights w = inverse_frequency_weights(counts(280, std::vector<std::size_t>(28, 10)));
    for (std::size_t k = 0; k < 28; ++k) CHECK(w[k] == 1.0);
}

TEST_CASE("a label without examples has no weight") {
    std::vector<std::size_t> per(28, 3);
    per[16] = 0;
    const auto vocab = LabelVocabulary::goemotions();
    try {
        inverse_frequency_weights(counts(50, per), &vocab);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("grief") != std::string::npos);
    }
}

TEST_CASE("class weights validate and round-trip") {
    CHECK_THROWS_AS(ClassWeights(Vector::Constant(3, 0.0)), ValidationError);
    CHECK_THROWS_AS(ClassWeights(Vector::Constant(3, std::nan(""))), ValidationError);
    testing::TempDir dir;
    const auto vocab = LabelVocabulary::goemotions();
    Vector v(28);
    for (Eigen::Index k = 0; k < 28; ++k) v(k) = 1.0 / (1.0 + static_cast<double>(k));
    ClassWeights(v).save(dir.file("w.tsv"), vocab);
    CHECK(ClassWeights::load(dir.file("w.tsv"), vocab).values() == v);
}

TEST_CASE("bce closed forms") {
    const Matrix half = Matrix::Constant(1, 1, 0.5);
    const BinaryMatrix pos = BinaryMatrix::Ones(1, 1);
    CHECK_THAT(weighted_bce(half, pos), WithinRel(std::log(2.0), 1e-15));
    const ClassWeights two(Vector::Constant(1, 2.0));
    CHECK_THAT(weighted_bce(half, pos, &two), WithinRel(2.0 * std::log(2.0), 1e-15));
    // weights touch positive targets only
    CHECK_THAT(weighted_bce(half, BinaryMatrix::Zero(1, 1), &two), WithinRel(std::log(2.0), 1e-15));
}

TEST_CASE("perfect predictions have near-zero loss") {
    std::mt19937_64 rng(1);
    const BinaryMatrix y = random_targets(5, 7, rng);
    const Matrix p = y.cast<double>();
    CHECK(weighted_bce(p, y) < 1e-10);
    CHECK(focal_loss(p, y, nullptr, 2.0) < 1e-10);
    CHECK(weighted_bce(p, y) >= 0.0);
}

TEST_CASE("focal closed form") {
    const Matrix p = Matrix::Constant(1, 1, 0.9);
    const BinaryMatrix y = BinaryMatrix::Ones(1, 1);
    CHECK_THAT(focal_loss(p, y, nullptr, 2.0), WithinAbs(1.0536e-3, 5e-8));
    CHECK_THAT(focal_loss(p, y, nullptr, 2.0), WithinRel(0.01 * -std::log(0.9), 1e-12));
    // a negative target uses p_t = 1 - p
    CHECK_THAT(focal_loss(Matrix::Constant(1, 1, 0.1), BinaryMatrix::Zero(1, 1), nullptr, 2.0),
               WithinRel(0.01 * -std::log(0.9), 1e-12));
}

TEST_CASE("focal with gamma 0 and unit alpha is bce") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix p = random_probs(4, 6, rng);
        const BinaryMatrix y = random_targets(4, 6, rng);
        const ClassWeights ones = ClassWeights::uniform(6);
        CHECK(std::abs(focal_loss(p, y, &ones, 0.0) - weighted_bce(p, y)) < 1e-12);
        CHECK(std::abs(focal_loss(p, y, nullptr, 0.0) - weighted_bce(p, y)) < 1e-12);
    }
}

TEST_CASE("focal shrinks faster than bce as the prediction improves") {
    const BinaryMatrix y = BinaryMatrix::Ones(1, 1);
    for (double p : {0.9, 0.99, 0.999}) {
        const Matrix m = Matrix::Constant(1, 1, p);
        CHECK_THAT(focal_loss(m, y, nullptr, 2.0) / weighted_bce(m, y), WithinRel((1 - p) * (1 - p), 1e-9));
    }
}

TEST_CASE("focal is non-increasing in p_t") {
    for (bool positive : {true, false}) {
        double prev = INFINITY;
        for (int s = 1; s < 1000; ++s) {
            const double pt = s / 1000.0;
            const double term = loss_detail::focal_term(positive ? pt : 1.0 - pt, positive, 1.3, 2.0);
            CHECK(term <= prev);
            CHECK(term >= 0.0);
            prev = term;
        }
    }
}

TEST_CASE("clamping keeps saturated losses finite") {
    const BinaryMatrix y = BinaryMatrix::Ones(1, 2);
    const Matrix p = (Matrix(1, 2) << 0.0, 1.0).finished();
    const double v = weighted_bce(p, y);
    CHECK(std::isfinite(v));
    CHECK_THAT(v, WithinRel(-std::log(1e-12) / 2.0, 1e-9));
    CHECK(loss_detail::bce_grad(0.0, true, 1.0) == 0.0);
    CHECK(loss_detail::focal_grad(1.0, false, 1.0, 2.0) == 0.0);
}

TEST_CASE("loss inputs are validated") {
    CHECK_THROWS_AS(weighted_bce(Matrix::Constant(2, 2, 0.5), BinaryMatrix::Zero(2, 3)), ShapeError);
    CHECK_THROWS_AS(weighted_bce(Matrix::Constant(1, 1, 1.5), BinaryMatrix::Zero(1, 1)), ValidationError);
    const ClassWeights w3 = ClassWeights::uniform(3);
    CHECK_THROWS_AS(focal_loss(Matrix::Constant(1, 2, 0.5), BinaryMatrix::Zero(1, 2), &w3, 2.0), ShapeError);
    CHECK_THROWS_AS(focal_loss(Matrix::Constant(1, 1, 0.5), BinaryMatrix::Zero(1, 1), nullptr, -1.0), ValidationError);
}

TEST_CASE("tape losses agree with the value functions and pass gradient checks") {
    std::mt19937_64 rng(9);
    ad::ParameterSet ps;
    // Bounded logits: a confidently correct cell under gamma = 2 has a
    // gradient near 1e-8, below what central differences resolve.
    std::uniform_real_distribution<double> n(-2.5, 2.5);
    Matrix z(4, 5);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
    ps.add("z", z);
    const BinaryMatrix y = random_targets(4, 5, rng);
    Vector wv(5);
    wv << 0.5, 1.0, 1.5, 2.0, 3.0;
    const ClassWeights w(wv);

    for (LossKind kind : {LossKind::kWeightedBce, LossKind::kFocal}) {
        LossConfig cfg;
        cfg.kind = kind;
        cfg.weights = w;
        for (double gamma : {0.0, 1.0, 2.0, 3.5}) {
            cfg.gamma = gamma;
            auto f = [&](ad::Tape& t) { return ad::loss(ad::sigmoid(t.parameter(ps["z"])), y, cfg); };
            ad::Tape t;
            const double tape_value = f(t).item();
            const Matrix p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
            const double direct = kind == LossKind::kFocal ? focal_loss(p, y, &w, gamma) : weighted_bce(p, y, &w);
            CHECK_THAT(tape_value, WithinRel(direct, 1e-14));
            const auto gc = ad::grad_check(f, ps);
            INFO(to_string(kind) << " gamma " << gamma << " worst " << gc.worst_parameter << "[" << gc.worst_index << "] analytic " << gc.worst_analytic << " numeric " << gc.worst_numeric);
            CHECK(gc.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("loss kind names") {
    CHECK(parse_loss_kind("focal") == LossKind::kFocal);
    CHECK(parse_loss_kind("bce") == LossKind::kWeightedBce);
    CHECK(parse_loss_kind("weighted_bce") == LossKind::kWeightedBce);
    CHECK_THROWS_AS(parse_loss_kind("hinge"), ValidationError);
    CHECK(to_string(LossKind::kFocal) == "focal");
}
