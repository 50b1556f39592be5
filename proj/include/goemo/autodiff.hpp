#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records one forward pass; Var is a handle to a recorded
// value. Parameters live outside any tape so one model can be evaluated on
// many tapes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "goemo/dense.hpp"
#include "goemo/error.hpp"

namespace goemo::ad {

using Scalar = double;
using Rng = std::mt19937_64;

/// A named trainable tensor with its gradient and Adam moments.
struct Parameter {
    Parameter(std::string name, Matrix init);

    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
    std::int64_t step = 0;
};

class ParameterSet {
   public:
    ParameterSet() = default;
    ParameterSet(const ParameterSet& other);
    ParameterSet& operator=(const ParameterSet& other);
    ParameterSet(ParameterSet&&) noexcept = default;
    ParameterSet& operator=(ParameterSet&&) noexcept = default;

    /// Throws ValidationError on a duplicate name.
    Parameter& add(std::string name, Matrix init);
    Parameter& operator[](std::string_view name);
    const Parameter& operator[](std::string_view name) const;
    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t num_scalars() const;
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.cbegin(); }
    auto end() const { return params_.cend(); }

    void zero_grad();
    double grad_norm() const;

    /// Overwrites values (not optimizer state) from `other`; names and shapes
    /// must match exactly.
    void copy_values_from(const ParameterSet& other);

    /// Binary container. Layout (little-endian):
    ///   "GOEMOPS1" | u64 count | count x { u64 name_len | name | u64 rows | u64 cols | rows*cols f64 row-major }
    void save(const std::string& path) const;
    static ParameterSet load(const std::string& path);

   private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
   public:
    Var() = default;

    const Matrix& value() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    /// The single entry of a 1x1 value.
    Scalar item() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

   private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
   public:
    /// Receives the gradient of the node's output.
    using BackwardFn = std::function<void(Tape&, const Matrix&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Leaf that accumulates a gradient but is not a Parameter.
    Var variable(Matrix value);
    /// Leaf bound to `p`; registering the same parameter twice returns the
    /// same node.
    Var parameter(Parameter& p);

    /// Records an op result. `backward` is dropped when no parent needs a
    /// gradient.
    Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
    Var record(Matrix value, std::span<const Var> parents, BackwardFn backward);

    /// Populates gradients of every node reachable from `loss` (1x1).
    /// Node gradients are reset first, so repeated calls give the same
    /// result. Gradients of parameters registered on this tape are
    /// overwritten; parameters off the loss path receive zeros.
    void backward(const Var& loss);

    /// Disables gradient bookkeeping for inference.
    void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    std::size_t size() const noexcept { return nodes_.size(); }
    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    template <typename Derived>
    void accumulate(const Var& target, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[target.id()];
        if (n.requires_grad) n.grad += g;
    }

   private:
    struct Node {
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        Parameter* parameter = nullptr;
        bool requires_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, std::size_t> parameter_nodes_;
    bool grad_enabled_ = true;
};

// Ops. Every op checks operand shapes and throws ShapeError naming both.

Var matmul(const Var& a, const Var& b);
/// a + b for equal shapes; a 1 x cols `b` is broadcast over the rows of `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product of equal shapes.
Var cwise_product(const Var& a, const Var& b);
/// Multiplies row r of `a` by s(r, 0).
Var scale_rows(const Var& a, const Var& s);
Var scale(const Var& a, Scalar factor);
/// [a, b] along columns.
Var concat_cols(const Var& a, const Var& b);
/// Concatenates rows x 1 columns into rows x n.
Var concat_cols(const std::vector<Var>& columns);
Var column(const Var& a, Eigen::Index j);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);

enum class Axis {
    kRowwise,  // each row is normalized / reduced
    kColwise,  // each column is normalized / reduced
};

/// Softmax along `axis`. Entries where `mask` is 0 get probability 0; every
/// normalized slice must keep at least one unmasked entry.
Var softmax(const Var& a, Axis axis, const BinaryMatrix* mask = nullptr);
/// rows x 1 sums of each row.
Var row_sum(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// Inverted dropout: at train time entries are zeroed with probability
/// `rate` and survivors scaled by 1/(1-rate). Identity otherwise.
Var dropout(const Var& a, Scalar rate, Rng& rng, bool training);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

/// Adam with bias correction; hyperparameter defaults follow Kingma & Ba.
struct AdamConfig {
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

/// Applies one Adam update to every parameter. Throws NumericError naming
/// the first parameter with a non-finite gradient, before touching any.
void adam_step(ParameterSet& params, const AdamConfig& config = {});

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
Scalar clip_grad_norm(ParameterSet& params, Scalar max_norm);

struct GradCheckOptions {
    Scalar epsilon = 1e-5;
    /// 0 checks every coordinate; otherwise a seeded sample per parameter.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    Scalar max_relative_error = 0.0;
    std::string worst_parameter;
    Eigen::Index worst_index = -1;
    Scalar worst_analytic = 0.0;
    Scalar worst_numeric = 0.0;
    std::size_t coordinates_checked = 0;
};

using LossBuilder = std::function<Var(Tape&)>;

/// Compares backward gradients with central finite differences:
/// max over checked coordinates of |a - n| / max(|a|, |n|, 1e-8).
/// `loss` must be deterministic. Parameter values are restored afterwards.
GradCheckResult grad_check(const LossBuilder& loss, ParameterSet& params, const GradCheckOptions& options = {});

}  // namespace goemo::ad
