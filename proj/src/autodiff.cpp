#include "goemo/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace goemo::ad {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_same_tape(const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw ShapeError("operands recorded on different tapes");
}

constexpr char kMagic[8] = {'G', 'O', 'E', 'M', 'O', 'P', 'S', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("truncated parameter file");
    return v;
}

}  // namespace

Parameter::Parameter(std::string name_, Matrix init)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      first_moment(Matrix::Zero(value.rows(), value.cols())),
      second_moment(Matrix::Zero(value.rows(), value.cols())) {}

ParameterSet::ParameterSet(const ParameterSet& other) : index_(other.index_) {
    params_.reserve(other.params_.size());
    for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
    if (this != &other) {
        ParameterSet copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Parameter& ParameterSet::add(std::string name, Matrix init) {
    if (index_.contains(name)) throw ValidationError("duplicate parameter name " + name);
    if (!init.allFinite()) throw NumericError("initial value of " + name + " is not finite");
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(init)));
    return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::operator[](std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw ValidationError("no parameter named " + std::string(name));
}

const Parameter& ParameterSet::operator[](std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw ValidationError("no parameter named " + std::string(name));
}

std::size_t ParameterSet::num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p->grad.setZero();
}

double ParameterSet::grad_norm() const {
    double sq = 0.0;
    for (const auto& p : params_) sq += p->grad.squaredNorm();
    return std::sqrt(sq);
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    if (other.size() != size()) throw ShapeError("parameter sets differ in size");
    for (auto& p : params_) {
        const Parameter* src = other.find(p->name);
        if (!src) throw ShapeError("missing parameter " + p->name);
        if (src->value.rows() != p->value.rows() || src->value.cols() != p->value.cols())
            throw ShapeError("parameter " + p->name + ": shape " + shape_string(src->value) + " vs " +
                             shape_string(p->value));
        p->value = src->value;
    }
}

void ParameterSet::save(const std::string& path) const {
    static_assert(std::endian::native == std::endian::little, "container format is little-endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write parameters: " + path);
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint64_t>(out, params_.size());
    for (const auto& p : params_) {
        write_pod<std::uint64_t>(out, p->name.size());
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
    }
    if (!out) throw Error("failed writing parameters: " + path);
}

ParameterSet ParameterSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read parameters: " + path);
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError(path + ": not a parameter container");
    ParameterSet set;
    const auto count = read_pod<std::uint64_t>(in);
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto len = read_pod<std::uint64_t>(in);
        if (len > 4096) throw ParseError(path + ": implausible parameter name length");
        std::string name(len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(len));
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(value.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw ParseError(path + ": truncated tensor " + name);
        set.add(std::move(name), std::move(value));
    }
    return set;
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Scalar Var::item() const {
    const Matrix& v = value();
    if (v.size() != 1) throw ShapeError("item() on a " + shape_string(v) + " value");
    return v(0, 0);
}

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) { return push(Node{std::move(value), {}, {}, nullptr, false}); }

Var Tape::variable(Matrix value) { return push(Node{std::move(value), {}, {}, nullptr, grad_enabled_}); }

Var Tape::parameter(Parameter& p) {
    if (auto it = parameter_nodes_.find(&p); it != parameter_nodes_.end()) return Var(this, it->second);
    Var v = push(Node{p.value, {}, {}, &p, grad_enabled_});
    parameter_nodes_.emplace(&p, v.id());
    return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
    bool needs = false;
    for (const Var& p : parents) {
        if (&p.tape() != this) throw ShapeError("operand recorded on a different tape");
        needs = needs || nodes_[p.id()].requires_grad;
    }
    needs = needs && grad_enabled_;
    return push(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
}

void Tape::backward(const Var& loss) {
    if (&loss.tape() != this) throw ShapeError("loss recorded on a different tape");
    const Matrix& lv = nodes_[loss.id()].value;
    if (lv.size() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_string(lv));
    for (auto& n : nodes_) {
        if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    if (nodes_[loss.id()].requires_grad) {
        nodes_[loss.id()].grad(0, 0) = 1.0;
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.requires_grad && n.backward) n.backward(*this, n.grad);
        }
    }
    for (auto& [param, id] : parameter_nodes_) {
        const Node& n = nodes_[id];
        if (n.requires_grad) {
            param->grad = n.grad;
        } else {
            param->grad.setZero();
        }
    }
}

Var matmul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows()) shape_mismatch("matmul", a.value(), b.value());
    return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g * b.value().transpose());
        t.accumulate(b, a.value().transpose() * g);
    });
}

Var add(const Var& a, const Var& b) {
    require_same_tape(a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
        return a.tape().record(av + bv, {a, b}, [a, b](Tape& t, const Matrix& g) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
    }
    if (bv.rows() == 1 && bv.cols() == av.cols()) {
        Matrix out = av.rowwise() + bv.row(0);
        return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
            t.accumulate(a, g);
            t.accumulate(b, g.colwise().sum());
        });
    }
    shape_mismatch("add", av, bv);
}

Var sub(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch("sub", a.value(), b.value());
    return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, -g);
    });
}

Var cwise_product(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch("cwise_product", a.value(), b.value());
    return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(b.value()));
        t.accumulate(b, g.cwiseProduct(a.value()));
    });
}

Var scale_rows(const Var& a, const Var& s) {
    require_same_tape(a, s);
    if (s.cols() != 1 || s.rows() != a.rows()) shape_mismatch("scale_rows", a.value(), s.value());
    Matrix out = s.value().col(0).asDiagonal() * a.value();
    return a.tape().record(std::move(out), {a, s}, [a, s](Tape& t, const Matrix& g) {
        t.accumulate(a, s.value().col(0).asDiagonal() * g);
        t.accumulate(s, g.cwiseProduct(a.value()).rowwise().sum());
    });
}

Var scale(const Var& a, Scalar factor) {
    return a.tape().record(a.value() * factor, {a}, [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var concat_cols(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.rows() != b.rows()) shape_mismatch("concat_cols", a.value(), b.value());
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const Eigen::Index split = a.cols();
    return a.tape().record(std::move(out), {a, b}, [a, b, split](Tape& t, const Matrix& g) {
        t.accumulate(a, g.leftCols(split));
        t.accumulate(b, g.rightCols(g.cols() - split));
    });
}

Var concat_cols(const std::vector<Var>& columns) {
    if (columns.empty()) throw ShapeError("concat_cols of nothing");
    Tape& tape = columns.front().tape();
    const Eigen::Index rows = columns.front().rows();
    Matrix out(rows, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (&columns[j].tape() != &tape) throw ShapeError("operands recorded on different tapes");
        if (columns[j].rows() != rows || columns[j].cols() != 1)
            shape_mismatch("concat_cols", columns.front().value(), columns[j].value());
        out.col(static_cast<Eigen::Index>(j)) = columns[j].value().col(0);
    }
    return tape.record(std::move(out), columns, [columns](Tape& t, const Matrix& g) {
        for (std::size_t j = 0; j < columns.size(); ++j) t.accumulate(columns[j], g.col(static_cast<Eigen::Index>(j)));
    });
}

Var column(const Var& a, Eigen::Index j) {
    if (j < 0 || j >= a.cols()) throw ShapeError("column " + std::to_string(j) + " of " + shape_string(a.value()));
    return a.tape().record(a.value().col(j), {a}, [a, j](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        full.col(j) = g.col(0);
        t.accumulate(a, full);
    });
}

Var sigmoid(const Var& a) {
    Matrix out = a.value().unaryExpr([](Scalar x) {
        // Split by sign so exp never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (1.0 + e);
    });
    return a.tape().record(out, {a}, [a, out](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
    });
}

Var tanh(const Var& a) {
    Matrix out = a.value().array().tanh().matrix();
    return a.tape().record(out, {a}, [a, out](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct((1.0 - out.array().square()).matrix()));
    });
}

Var exp(const Var& a) {
    Matrix out = a.value().array().exp().matrix();
    return a.tape().record(out, {a}, [a, out](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(out)); });
}

Var log(const Var& a) {
    if ((a.value().array() <= 0.0).any()) throw NumericError("log of a non-positive value");
    return a.tape().record(a.value().array().log().matrix(), {a}, [a](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseQuotient(a.value()));
    });
}

Var softmax(const Var& a, Axis axis, const BinaryMatrix* mask) {
    const Matrix& x = a.value();
    if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols()))
        throw ShapeError("softmax: mask " + shape_string(*mask) + " vs input " + shape_string(x));
    // Work row-wise on a (possibly transposed) copy.
    const bool rowwise = axis == Axis::kRowwise;
    Matrix v = rowwise ? x : Matrix(x.transpose());
    BinaryMatrix m;
    if (mask) m = rowwise ? *mask : BinaryMatrix(mask->transpose());
    Matrix out = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        Scalar hi = -std::numeric_limits<Scalar>::infinity();
        bool any = false;
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (mask && !m(r, c)) continue;
            if (!std::isfinite(v(r, c))) throw NumericError("softmax: non-finite input");
            hi = std::max(hi, v(r, c));
            any = true;
        }
        if (!any) throw ValidationError("softmax: every entry of a slice is masked");
        Scalar total = 0.0;
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (!mask || m(r, c)) {
                out(r, c) = std::exp(v(r, c) - hi);
                total += out(r, c);
            }
        }
        out.row(r) /= total;
    }
    if (!rowwise) out.transposeInPlace();
    return a.tape().record(out, {a}, [a, out, rowwise](Tape& t, const Matrix& g) {
        if (rowwise) {
            const Vector dots = g.cwiseProduct(out).rowwise().sum();
            t.accumulate(a, out.cwiseProduct((g.colwise() - dots)));
        } else {
            const Eigen::RowVectorXd dots = g.cwiseProduct(out).colwise().sum();
            t.accumulate(a, out.cwiseProduct((g.rowwise() - dots)));
        }
    });
}

Var row_sum(const Var& a) {
    return a.tape().record(a.value().rowwise().sum(), {a}, [a](Tape& t, const Matrix& g) {
        t.accumulate(a, g.col(0).replicate(1, a.cols()));
    });
}

Var sum(const Var& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

Var mean(const Var& a) {
    if (a.value().size() == 0) throw ShapeError("mean of an empty value");
    const auto n = static_cast<Scalar>(a.value().size());
    Matrix out(1, 1);
    out(0, 0) = a.value().sum() / n;
    return a.tape().record(std::move(out), {a}, [a, n](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
    });
}

Var dropout(const Var& a, Scalar rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return a;
    std::uniform_real_distribution<Scalar> uniform(0.0, 1.0);
    const Scalar keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform(rng) < rate ? 0.0 : keep_scale;
    return cwise_product(a, a.tape().constant(std::move(mask)));
}

void adam_step(ParameterSet& params, const AdamConfig& config) {
    for (const auto& p : params) {
        if (!p->grad.allFinite()) throw NumericError("non-finite gradient in parameter " + p->name);
    }
    for (auto& p : params) {
        ++p->step;
        p->first_moment = config.beta1 * p->first_moment + (1.0 - config.beta1) * p->grad;
        p->second_moment = config.beta2 * p->second_moment + (1.0 - config.beta2) * p->grad.cwiseAbs2();
        const Scalar c1 = 1.0 - std::pow(config.beta1, static_cast<Scalar>(p->step));
        const Scalar c2 = 1.0 - std::pow(config.beta2, static_cast<Scalar>(p->step));
        p->value.array() -= config.lr * (p->first_moment.array() / c1) /
                            ((p->second_moment.array() / c2).sqrt() + config.eps);
    }
}

Scalar clip_grad_norm(ParameterSet& params, Scalar max_norm) {
    const Scalar norm = params.grad_norm();
    if (norm > max_norm && norm > 0.0) {
        const Scalar factor = max_norm / norm;
        for (auto& p : params) p->grad *= factor;
    }
    return norm;
}

GradCheckResult grad_check(const LossBuilder& loss, ParameterSet& params, const GradCheckOptions& options) {
    if (!(options.epsilon > 0.0)) throw ValidationError("grad_check epsilon must be positive");
    auto evaluate = [&loss]() {
        Tape t;
        t.set_grad_enabled(false);
        const Scalar v = loss(t).item();
        if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
        return v;
    };

    params.zero_grad();
    {
        Tape t;
        Var l = loss(t);
        if (!std::isfinite(l.item())) throw NumericError("grad_check: loss is not finite");
        t.backward(l);
    }
    std::vector<Matrix> analytic;
    for (const auto& p : params) analytic.push_back(p->grad);

    GradCheckResult result;
    Rng rng(options.seed);
    std::size_t k = 0;
    for (auto& p : params) {
        const Matrix& a = analytic[k++];
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(p->value.size()));
        std::iota(coords.begin(), coords.end(), Eigen::Index{0});
        if (options.max_coords_per_param > 0 && coords.size() > options.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (Eigen::Index idx : coords) {
            Scalar& x = p->value.data()[idx];
            const Scalar saved = x;
            x = saved + options.epsilon;
            const Scalar plus = evaluate();
            x = saved - options.epsilon;
            const Scalar minus = evaluate();
            x = saved;
            const Scalar numeric = (plus - minus) / (2.0 * options.epsilon);
            const Scalar an = a.data()[idx];
            const Scalar rel = std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), 1e-8});
            ++result.coordinates_checked;
            if (rel > result.max_relative_error || result.worst_index < 0) {
                result.max_relative_error = rel;
                result.worst_parameter = p->name;
                result.worst_index = idx;
                result.worst_analytic = an;
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace goemo::ad
