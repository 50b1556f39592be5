#include "goemo/imbalance.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "goemo/corpus.hpp"

namespace goemo {

ClassWeights::ClassWeights(Vector weights) : w_(std::move(weights)) {
    for (Eigen::Index k = 0; k < w_.size(); ++k) {
        if (!std::isfinite(w_(k)) || w_(k) <= 0.0)
            throw ValidationError("class weight " + std::to_string(k) + " must be finite and > 0");
    }
}

ClassWeights ClassWeights::uniform(std::size_t num_labels) {
    return ClassWeights(Vector::Ones(static_cast<Eigen::Index>(num_labels)));
}

void ClassWeights::save(const std::string& path, const LabelVocabulary& vocab) const {
    if (vocab.size() != size()) throw ShapeError("class weights and label vocabulary differ in size");
    std::ofstream out(path);
    if (!out) throw Error("cannot write class weights: " + path);
    char buf[32];
    for (std::size_t k = 0; k < size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", (*this)[k]);
        out << vocab.name(k) << '\t' << buf << '\n';
    }
}

ClassWeights ClassWeights::load(const std::string& path, const LabelVocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read class weights: " + path);
    Vector w = Vector::Constant(static_cast<Eigen::Index>(vocab.size()), -1.0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(path + ": expected label<TAB>weight", lineno);
        const std::size_t k = vocab.index_of(line.substr(0, tab));
        double v = 0.0;
        const char* first = line.data() + tab + 1;
        const char* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) throw ParseError(path + ": bad weight", lineno);
        w(static_cast<Eigen::Index>(k)) = v;
    }
    for (std::size_t k = 0; k < vocab.size(); ++k) {
        if (w(static_cast<Eigen::Index>(k)) < 0.0) throw ValidationError(path + ": no weight for " + vocab.name(k));
    }
    return ClassWeights(std::move(w));
}

ClassWeights inverse_frequency_weights(const CorpusStats& stats, const LabelVocabulary* vocab) {
    const std::size_t K = stats.per_label_counts.size();
    if (K == 0 || stats.total == 0) throw ValidationError("inverse-frequency weights need a non-empty corpus");
    Vector w(static_cast<Eigen::Index>(K));
    const auto N = static_cast<double>(stats.total);
    for (std::size_t c = 0; c < K; ++c) {
        const std::size_t n = stats.per_label_counts[c];
        if (n == 0) {
            const std::string label = vocab ? vocab->name(c) : std::to_string(c);
            throw ValidationError("label " + label + " has no training examples; its weight is undefined");
        }
        w(static_cast<Eigen::Index>(c)) = N / (static_cast<double>(n) * static_cast<double>(K));
    }
    return ClassWeights(std::move(w));
}

LossKind parse_loss_kind(const std::string& name) {
    if (name == "bce" || name == "weighted_bce") return LossKind::kWeightedBce;
    if (name == "focal") return LossKind::kFocal;
    throw ValidationError("unknown loss '" + name + "' (expected bce or focal)");
}

std::string to_string(LossKind kind) { return kind == LossKind::kFocal ? "focal" : "bce"; }

namespace ad {

namespace {

template <typename TermFn, typename GradFn>
Var elementwise_loss(const Var& probs, const BinaryMatrix& targets, const ClassWeights* weights, TermFn term,
                     GradFn grad) {
    loss_detail::check_loss_inputs(probs.value(), targets, weights);
    const Matrix& p = probs.value();
    const double scale = 1.0 / static_cast<double>(p.size());
    Matrix out(1, 1);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            const double w = weights ? (*weights)[static_cast<std::size_t>(k)] : 1.0;
            total += term(p(i, k), targets(i, k) != 0, w);
        }
    }
    out(0, 0) = total * scale;
    std::optional<ClassWeights> w_copy;
    if (weights) w_copy = *weights;
    return probs.tape().record(std::move(out), {probs},
                               [probs, targets, w_copy, scale, grad](Tape& t, const Matrix& g) {
                                   const Matrix& pv = probs.value();
                                   Matrix d(pv.rows(), pv.cols());
                                   for (Eigen::Index i = 0; i < pv.rows(); ++i) {
                                       for (Eigen::Index k = 0; k < pv.cols(); ++k) {
                                           const double w = w_copy ? (*w_copy)[static_cast<std::size_t>(k)] : 1.0;
                                           d(i, k) = grad(pv(i, k), targets(i, k) != 0, w);
                                       }
                                   }
                                   t.accumulate(probs, d * (scale * g(0, 0)));
                               });
}

}  // namespace

Var weighted_bce(const Var& probs, const BinaryMatrix& targets, const ClassWeights* weights) {
    return elementwise_loss(probs, targets, weights, loss_detail::bce_term, loss_detail::bce_grad);
}

Var focal_loss(const Var& probs, const BinaryMatrix& targets, const ClassWeights* alpha, double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("focal gamma must be finite and >= 0");
    return elementwise_loss(
        probs, targets, alpha,
        [gamma](double p, bool pos, double w) { return loss_detail::focal_term(p, pos, w, gamma); },
        [gamma](double p, bool pos, double w) { return loss_detail::focal_grad(p, pos, w, gamma); });
}

Var loss(const Var& probs, const BinaryMatrix& targets, const LossConfig& config) {
    const ClassWeights* w = config.weights ? &*config.weights : nullptr;
    if (config.kind == LossKind::kFocal) return focal_loss(probs, targets, w, config.gamma);
    return weighted_bce(probs, targets, w);
}

}  // namespace ad

}  // namespace goemo
