#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "goemo/autodiff.hpp"
#include "goemo/dense.hpp"
#include "goemo/error.hpp"

namespace goemo {

class LabelVocabulary;
struct CorpusStats;

/// Per-label positive-class weights, all finite and > 0.
class ClassWeights {
   public:
    explicit ClassWeights(Vector weights);
    static ClassWeights uniform(std::size_t num_labels);

    std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }
    double operator[](std::size_t k) const { return w_(static_cast<Eigen::Index>(k)); }
    const Vector& values() const noexcept { return w_; }

    /// `label_name<TAB>weight` lines in label order.
    void save(const std::string& path, const LabelVocabulary& vocab) const;
    static ClassWeights load(const std::string& path, const LabelVocabulary& vocab);

   private:
    Vector w_;
};

/// w_c = N / (n_c * K). Throws ValidationError naming any label with n_c = 0.
ClassWeights inverse_frequency_weights(const CorpusStats& stats, const LabelVocabulary* vocab = nullptr);

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

namespace loss_detail {

inline double clamp_prob(double p) { return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp); }

// Elementwise terms, before the 1/(N*K) mean. `weight` multiplies positive
// targets only.
inline double bce_term(double p, bool positive, double weight) {
    const double q = clamp_prob(p);
    const double y = positive ? 1.0 : 0.0;
    const double u = positive ? weight : 1.0;
    return -u * (y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

inline double bce_grad(double p, bool positive, double weight) {
    if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
    const double y = positive ? 1.0 : 0.0;
    const double u = positive ? weight : 1.0;
    return -u * (y / p - (1.0 - y) / (1.0 - p));
}

// Focal term with p_t the probability assigned to the true class.
inline double focal_term(double p, bool positive, double weight, double gamma) {
    const double q = clamp_prob(p);
    const double pt = positive ? q : 1.0 - q;
    const double u = positive ? weight : 1.0;
    return -u * std::pow(1.0 - pt, gamma) * std::log(pt);
}

inline double focal_grad(double p, bool positive, double weight, double gamma) {
    if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
    const double pt = positive ? p : 1.0 - p;
    const double u = positive ? weight : 1.0;
    const double modulated = std::pow(1.0 - pt, gamma) / pt;
    const double focusing = gamma == 0.0 ? 0.0 : gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
    const double d_pt = -u * (modulated - focusing);
    return positive ? d_pt : -d_pt;
}

template <typename DerivedP, typename DerivedY>
void check_loss_inputs(const Eigen::MatrixBase<DerivedP>& probs, const Eigen::MatrixBase<DerivedY>& targets,
                       const ClassWeights* weights) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw ShapeError("loss: probabilities " + shape_string(probs) + " vs targets " + shape_string(targets));
    if (weights && static_cast<Eigen::Index>(weights->size()) != probs.cols())
        throw ShapeError("loss: " + std::to_string(weights->size()) + " class weights for " +
                         std::to_string(probs.cols()) + " labels");
    if (probs.size() == 0) throw ShapeError("loss over an empty matrix");
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double p = static_cast<double>(probs(i, k));
            if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]: " + std::to_string(p));
        }
    }
}

}  // namespace loss_detail

/// Mean binary cross-entropy over all N x K cells, optionally with per-label
/// weights on positive targets.
template <typename DerivedP, typename DerivedY>
double weighted_bce(const Eigen::MatrixBase<DerivedP>& probs, const Eigen::MatrixBase<DerivedY>& targets,
                    const ClassWeights* weights = nullptr) {
    loss_detail::check_loss_inputs(probs, targets, weights);
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double w = weights ? (*weights)[static_cast<std::size_t>(k)] : 1.0;
            total += loss_detail::bce_term(static_cast<double>(probs(i, k)), targets(i, k) != 0, w);
        }
    }
    return total / static_cast<double>(probs.size());
}

/// Mean focal loss: each cell's cross-entropy scaled by (1 - p_t)^gamma and
/// by alpha_k on positive targets. gamma = 0 with unit alpha is exactly BCE.
template <typename DerivedP, typename DerivedY>
double focal_loss(const Eigen::MatrixBase<DerivedP>& probs, const Eigen::MatrixBase<DerivedY>& targets,
                  const ClassWeights* alpha, double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("focal gamma must be finite and >= 0");
    loss_detail::check_loss_inputs(probs, targets, alpha);
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double a = alpha ? (*alpha)[static_cast<std::size_t>(k)] : 1.0;
            total += loss_detail::focal_term(static_cast<double>(probs(i, k)), targets(i, k) != 0, a, gamma);
        }
    }
    return total / static_cast<double>(probs.size());
}

enum class LossKind { kWeightedBce, kFocal };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct LossConfig {
    LossKind kind = LossKind::kWeightedBce;
    double gamma = 2.0;
    /// Positive-target weights (alpha for focal); absent means all ones.
    std::optional<ClassWeights> weights;
};

namespace ad {

/// Differentiable versions; gradients flow into `probs`.
Var weighted_bce(const Var& probs, const BinaryMatrix& targets, const ClassWeights* weights = nullptr);
Var focal_loss(const Var& probs, const BinaryMatrix& targets, const ClassWeights* alpha, double gamma);
Var loss(const Var& probs, const BinaryMatrix& targets, const LossConfig& config);

}  // namespace ad

}  // namespace goemo
