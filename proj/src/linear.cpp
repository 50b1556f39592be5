#include "goemo/linear.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "goemo/error.hpp"

namespace goemo {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Weighted logistic objective for one label. theta = [w; b].
class LabelObjective {
   public:
    LabelObjective(const SparseMatrix& X, Vector y, Vector s, double l2)
        : X_(X), y_(std::move(y)), s_(std::move(s)), l2_(l2), inv_n_(1.0 / static_cast<double>(X.rows())) {}

    double operator()(const Vector& theta, Vector& grad) const {
        const Eigen::Index d = X_.cols();
        const auto w = theta.head(d);
        const double b = theta(d);
        const Vector z = (X_ * w).array() + b;
        Vector r(z.size());
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            loss += s_(i) * (softplus(z(i)) - y_(i) * z(i));
            r(i) = s_(i) * (sigmoid(z(i)) - y_(i)) * inv_n_;
        }
        grad.resize(theta.size());
        grad.head(d) = X_.transpose() * r + l2_ * w;
        grad(d) = r.sum();
        return loss * inv_n_ + 0.5 * l2_ * w.squaredNorm();
    }

   private:
    const SparseMatrix& X_;
    Vector y_;
    Vector s_;
    double l2_;
    double inv_n_;
};

// L-BFGS with Armijo backtracking. Every accepted step strictly decreases f.
Vector minimize(const LabelObjective& f, Vector theta, const LinearConfig& config, LabelFitTrace& trace,
                std::size_t label) {
    Vector g;
    double fx = f(theta, g);
    if (!std::isfinite(fx)) throw NumericError("label " + std::to_string(label) + ": non-finite initial loss");
    trace.objective.push_back(fx);

    std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs
    Vector g_new;
    for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() <= 1e-12) {
            trace.converged = true;
            break;
        }
        // Two-loop recursion.
        Vector q = g;
        std::vector<double> alpha(history.size());
        for (std::size_t j = history.size(); j-- > 0;) {
            const auto& [s, y] = history[j];
            alpha[j] = s.dot(q) / y.dot(s);
            q -= alpha[j] * y;
        }
        if (!history.empty()) {
            const auto& [s, y] = history.back();
            q *= s.dot(y) / y.squaredNorm();
        }
        for (std::size_t j = 0; j < history.size(); ++j) {
            const auto& [s, y] = history[j];
            const double beta = y.dot(q) / y.dot(s);
            q += (alpha[j] - beta) * s;
        }
        Vector direction = -q;
        double slope = g.dot(direction);
        if (!(slope < 0.0)) {
            history.clear();
            direction = -g;
            slope = -g.squaredNorm();
        }

        double step = history.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        Vector candidate;
        double f_new = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            candidate = theta + step * direction;
            f_new = f(candidate, g_new);
            if (!std::isfinite(f_new))
                throw NumericError("label " + std::to_string(label) + ": non-finite loss at iteration " +
                                   std::to_string(iter + 1));
            if (f_new <= fx + 1e-4 * step * slope && f_new < fx) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.iterations = iter + 1;
        if (!accepted) {
            // No representable decrease along a descent direction.
            trace.converged = true;
            break;
        }

        Vector s = candidate - theta;
        Vector y = g_new - g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            history.emplace_back(std::move(s), std::move(y));
            if (history.size() > config.memory) history.pop_front();
        }
        const double decrease = fx - f_new;
        theta = std::move(candidate);
        g.swap(g_new);
        fx = f_new;
        trace.objective.push_back(fx);
        if (decrease <= config.tolerance * std::max(std::abs(fx), 1e-300)) {
            trace.converged = true;
            break;
        }
    }
    return theta;
}

void fit_label(const SparseMatrix& X, const BinaryMatrix& Y, std::size_t k, double l2, const LinearConfig& config,
               Matrix& weights, Vector& bias, LabelFitTrace& trace) {
    const Eigen::Index n = X.rows();
    const auto col = static_cast<Eigen::Index>(k);
    Vector y(n);
    std::size_t n_pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = Y(i, col) != 0 ? 1.0 : 0.0;
        n_pos += Y(i, col) != 0;
    }
    const std::size_t n_neg = static_cast<std::size_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        const double rate = std::clamp(static_cast<double>(n_pos) / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
        weights.row(col).setZero();
        bias(col) = std::log(rate / (1.0 - rate));
        trace.degenerate = true;
        trace.converged = true;
        log_warning("label " + std::to_string(k) + " has " + (n_pos == 0 ? "no positive" : "no negative") +
                    " training examples; predicting the base rate");
        return;
    }
    Vector s = Vector::Ones(n);
    if (config.balanced) {
        const double w_pos = static_cast<double>(n) / (2.0 * static_cast<double>(n_pos));
        const double w_neg = static_cast<double>(n) / (2.0 * static_cast<double>(n_neg));
        for (Eigen::Index i = 0; i < n; ++i) s(i) = y(i) > 0.0 ? w_pos : w_neg;
    }
    LabelObjective objective(X, std::move(y), std::move(s), l2);
    const Vector theta = minimize(objective, Vector::Zero(X.cols() + 1), config, trace, k);
    weights.row(col) = theta.head(X.cols()).transpose();
    bias(col) = theta(X.cols());
}

}  // namespace

LinearModel::LinearModel(Matrix weights, Vector bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
    if (weights_.rows() != bias_.size())
        throw ShapeError("linear model: " + shape_string(weights_) + " weights with " +
                         std::to_string(bias_.size()) + " biases");
    if (!weights_.allFinite() || !bias_.allFinite()) throw NumericError("linear model has non-finite entries");
}

void LinearModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model: " + path);
    out << num_labels() << ' ' << dimension() << '\n';
    char buf[64];
    for (Eigen::Index k = 0; k < weights_.rows(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", bias_(k));
        out << buf;
        for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
            if (weights_(k, j) == 0.0) continue;
            std::snprintf(buf, sizeof buf, " %ld:%.17g", static_cast<long>(j), weights_(k, j));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing model: " + path);
}

LinearModel LinearModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read model: " + path);
    std::string line;
    std::size_t K = 0;
    std::size_t dim = 0;
    if (!std::getline(in, line)) throw ParseError(path + ": empty model file", 1);
    {
        std::istringstream header(line);
        if (!(header >> K >> dim) || K == 0) throw ParseError(path + ": expected header `K dimension`", 1);
    }
    Matrix weights = Matrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(dim));
    Vector bias(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t lineno = k + 2;
        if (!std::getline(in, line)) throw ParseError(path + ": missing classifier " + std::to_string(k), lineno);
        const auto bias_end = line.find(' ');
        const std::string bias_text = line.substr(0, bias_end);
        double b = 0.0;
        const auto [p, ec] = std::from_chars(bias_text.data(), bias_text.data() + bias_text.size(), b);
        if (ec != std::errc{} || p != bias_text.data() + bias_text.size())
            throw ParseError(path + ": bad bias", lineno);
        bias(static_cast<Eigen::Index>(k)) = b;
        if (bias_end != std::string::npos) {
            const SparseVector w = SparseVector::parse(line.substr(bias_end + 1), dim);
            for (std::size_t j = 0; j < w.nnz(); ++j) weights(static_cast<Eigen::Index>(k), w.indices[j]) = w.values[j];
        }
    }
    while (std::getline(in, line)) {
        if (!line.empty()) throw ParseError(path + ": trailing data after " + std::to_string(K) + " classifiers");
    }
    return LinearModel(std::move(weights), std::move(bias));
}

LinearModel train_binary_relevance(const SparseMatrix& X, const BinaryMatrix& Y, const LinearConfig& config,
                                   std::vector<LabelFitTrace>* traces) {
    if (X.rows() == 0) throw ValidationError("no training examples");
    if (X.rows() != Y.rows())
        throw ShapeError("features " + shape_string(X) + " vs labels " + shape_string(Y));
    if (Y.cols() == 0) throw ShapeError("no labels to train");
    const double l2 = config.l2 ? *config.l2 : 1.0 / (config.c * static_cast<double>(X.rows()));
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ValidationError("l2 must be finite and >= 0");

    const auto K = static_cast<std::size_t>(Y.cols());
    Matrix weights(Y.cols(), X.cols());
    Vector bias(Y.cols());
    std::vector<LabelFitTrace> local(K);
    std::vector<std::exception_ptr> errors(K);

    std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, K);
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t k = next++; k < K; k = next++) {
            try {
                fit_label(X, Y, k, l2, config, weights, bias, local[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    if (traces) *traces = std::move(local);
    return LinearModel(std::move(weights), std::move(bias));
}

LinearModel train_binary_relevance(std::span<const SparseVector> X, std::span<const LabelSet> Y,
                                   std::size_t num_labels, const LinearConfig& config,
                                   std::vector<LabelFitTrace>* traces) {
    if (X.size() != Y.size())
        throw ShapeError(std::to_string(X.size()) + " feature rows vs " + std::to_string(Y.size()) + " label sets");
    if (X.empty()) throw ValidationError("no training examples");
    return train_binary_relevance(stack_rows(X, X.front().dimension), label_matrix(Y, num_labels), config, traces);
}

Matrix predict_proba(const LinearModel& model, const SparseMatrix& X) {
    if (static_cast<std::size_t>(X.cols()) != model.dimension())
        throw ShapeError("feature dimension " + std::to_string(X.cols()) + " != model dimension " +
                         std::to_string(model.dimension()));
    Matrix z = X * model.weights().transpose();
    z.rowwise() += model.bias().transpose();
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix predict_proba(const LinearModel& model, std::span<const SparseVector> X) {
    for (const auto& row : X) {
        if (row.dimension != model.dimension())
            throw ShapeError("feature dimension " + std::to_string(row.dimension) + " != model dimension " +
                             std::to_string(model.dimension()));
    }
    return predict_proba(model, stack_rows(X, model.dimension()));
}

}  // namespace goemo
