#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goemo/corpus.hpp"
#include "goemo/dense.hpp"
#include "goemo/features.hpp"

namespace goemo {

struct LinearConfig {
    std::size_t max_iter = 1000;
    /// Stop once the relative decrease of the objective falls below this.
    double tolerance = 1e-6;
    /// Inverse regularization strength in the liblinear sense. Used only when
    /// `l2` is unset, as l2 = 1 / (c * N).
    double c = 1.0;
    /// Explicit coefficient of (l2/2)|w|^2 added to the mean weighted loss.
    /// The bias is never regularized.
    std::optional<double> l2;
    bool balanced = true;
    /// Labels trained concurrently; 0 uses the hardware concurrency.
    std::size_t workers = 0;
    /// L-BFGS history length.
    std::size_t memory = 10;
};

/// Per-label training record.
struct LabelFitTrace {
    std::vector<double> objective;  // value after each accepted step, starting at the initial point
    std::size_t iterations = 0;
    bool converged = false;
    /// No positives or no negatives; the classifier predicts the base rate.
    bool degenerate = false;
};

/// K independent logistic classifiers sharing one feature space.
class LinearModel {
   public:
    LinearModel(Matrix weights, Vector bias);

    std::size_t num_labels() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(weights_.cols()); }
    const Matrix& weights() const noexcept { return weights_; }  // K x dimension
    const Vector& bias() const noexcept { return bias_; }

    /// Header `K dimension`, then one line per label: `bias idx:val ...`
    /// listing the nonzero weights.
    void save(const std::string& path) const;
    static LinearModel load(const std::string& path);

   private:
    Matrix weights_;
    Vector bias_;
};

/// Fits one L2-regularized weighted logistic regression per column of Y:
///   (1/N) sum_i s_i [softplus(z_i) - y_i z_i] + (l2/2) |w|^2,  z_i = w.x_i + b
/// where s_i = N/(2 n_pos) or N/(2 n_neg) when balanced and 1 otherwise.
LinearModel train_binary_relevance(const SparseMatrix& X, const BinaryMatrix& Y, const LinearConfig& config = {},
                                   std::vector<LabelFitTrace>* traces = nullptr);
LinearModel train_binary_relevance(std::span<const SparseVector> X, std::span<const LabelSet> Y,
                                   std::size_t num_labels, const LinearConfig& config = {},
                                   std::vector<LabelFitTrace>* traces = nullptr);

/// N x K matrix of sigmoid(w_k.x_i + b_k). Rows are not normalized.
Matrix predict_proba(const LinearModel& model, const SparseMatrix& X);
Matrix predict_proba(const LinearModel& model, std::span<const SparseVector> X);

}  // namespace goemo
