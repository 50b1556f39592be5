#include "goemo/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "goemo/error.hpp"
#include "goemo/eval.hpp"
#include "goemo/textprep.hpp"

namespace goemo {

namespace {

constexpr std::string_view kGates[] = {"f", "i", "C", "o"};

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, ad::Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

std::size_t layer_input_dim(const BiLstmConfig& c, std::size_t layer) {
    return layer == 0 ? c.embedding_dim : 2 * c.hidden;
}

void check_config(const BiLstmConfig& c) {
    if (c.embedding_dim == 0 || c.hidden == 0 || c.layers == 0 || c.max_len == 0 || c.num_labels == 0)
        throw ValidationError("BiLSTM sizes must be positive");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
}

void check_train_config(const TrainConfig& t) {
    if (t.batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(t.adam.lr > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(t.clip_norm >= 0.0)) throw ValidationError("clip_norm must be >= 0 (0 disables clipping)");
    if (!(t.val_threshold > 0.0 && t.val_threshold < 1.0)) throw ValidationError("val_threshold must be in (0, 1)");
}

void check_param(const ad::ParameterSet& params, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    const ad::Parameter* p = params.find(name);
    if (!p) throw ShapeError("missing parameter " + name);
    if (p->value.rows() != rows || p->value.cols() != cols)
        throw ShapeError("parameter " + name + " is " + shape_string(p->value) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
}

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

BinaryMatrix gather_rows(const BinaryMatrix& m, std::span<const std::size_t> rows) {
    BinaryMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t j = 0; j < rows.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(static_cast<Eigen::Index>(rows[j]));
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t j = 0; j < rows.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(static_cast<Eigen::Index>(rows[j]));
    return out;
}

// One optimizer step; errors name the epoch and batch.
template <typename Forward>
double train_step(ad::ParameterSet& params, const TrainConfig& tc, const LossConfig& loss, const BinaryMatrix& targets,
                  Forward&& forward, std::size_t epoch, std::size_t batch) {
    const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
    try {
        ad::Tape tape;
        const ad::Var probs = forward(tape);
        const ad::Var l = ad::loss(probs, targets, loss);
        const double value = l.item();
        if (!std::isfinite(value)) throw NumericError("non-finite loss");
        tape.backward(l);
        if (tc.clip_norm > 0.0) ad::clip_grad_norm(params, tc.clip_norm);
        ad::adam_step(params, tc.adam);
        return value;
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where);
    }
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, ad::Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return batches;
}

std::vector<std::vector<Eigen::Index>> corpus_rows(const Corpus& corpus, const EmbeddingTable& table,
                                                   std::size_t max_len) {
    std::vector<std::vector<Eigen::Index>> rows;
    rows.reserve(corpus.size());
    for (const auto& ex : corpus.examples()) rows.push_back(lookup_rows(table, text::preprocess(ex.text), max_len));
    return rows;
}

Matrix predict_rows(const BiLstmModel& model, const EmbeddingTable& table,
                    std::span<const std::vector<Eigen::Index>> docs, std::size_t batch_size) {
    Matrix probs(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(model.config().num_labels));
    std::vector<std::size_t> which;
    for (std::size_t start = 0; start < docs.size(); start += batch_size) {
        which.clear();
        for (std::size_t i = start; i < std::min(docs.size(), start + batch_size); ++i) which.push_back(i);
        probs.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(which.size())) =
            model.predict(make_batch(table, docs, which));
    }
    return probs;
}

EpochRecord score_epoch(std::size_t epoch, double train_loss, const Matrix& val_probs, const BinaryMatrix& val_gold,
                        double threshold) {
    const auto pred = binarize(val_probs, Thresholds::uniform(static_cast<std::size_t>(val_probs.cols()), threshold));
    const auto mm = micro_macro(pred, val_gold);
    return {epoch, train_loss, mm.micro_f1, mm.macro_f1};
}

}  // namespace

void BiLstmConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    char dropout_text[32];
    std::snprintf(dropout_text, sizeof dropout_text, "%.17g", dropout);
    out << "embedding_dim=" << embedding_dim << "\nhidden=" << hidden << "\nlayers=" << layers
        << "\nmax_len=" << max_len << "\ndropout=" << dropout_text << "\nnum_labels=" << num_labels << '\n';
}

BiLstmConfig BiLstmConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read manifest: " + path);
    BiLstmConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": expected key=value", lineno);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            std::size_t used = 0;
            if (key == "dropout") {
                c.dropout = std::stod(value, &used);
            } else {
                const auto n = static_cast<std::size_t>(std::stoull(value, &used));
                if (key == "embedding_dim") c.embedding_dim = n;
                else if (key == "hidden") c.hidden = n;
                else if (key == "layers") c.layers = n;
                else if (key == "max_len") c.max_len = n;
                else if (key == "num_labels") c.num_labels = n;
                else throw ParseError(path + ": unknown key " + key, lineno);
            }
            if (used != value.size()) throw ParseError(path + ": bad value for " + key, lineno);
        } catch (const std::logic_error&) {
            throw ParseError(path + ": bad value for " + key, lineno);
        }
    }
    check_config(c);
    return c;
}

LstmState lstm_cell(const ad::Var& x, const LstmState& prev, const LstmWeights& w) {
    const Eigen::Index B = x.rows();
    const Eigen::Index H = prev.h.cols();
    if (prev.h.rows() != B || prev.c.rows() != B || prev.c.cols() != H)
        throw ShapeError("lstm_cell: x " + shape_string(x.value()) + ", h " + shape_string(prev.h.value()) + ", C " +
                         shape_string(prev.c.value()));
    for (const ad::Var* W : {&w.W_f, &w.W_i, &w.W_C, &w.W_o}) {
        if (W->rows() != H + x.cols() || W->cols() != H)
            throw ShapeError("lstm_cell: gate matrix " + shape_string(W->value()) + " for hidden " +
                             std::to_string(H) + " and input " + std::to_string(x.cols()));
    }
    for (const ad::Var* b : {&w.b_f, &w.b_i, &w.b_C, &w.b_o}) {
        if (b->rows() != 1 || b->cols() != H)
            throw ShapeError("lstm_cell: gate bias " + shape_string(b->value()) + " for hidden " + std::to_string(H));
    }
    const ad::Var hx = ad::concat_cols(prev.h, x);
    const ad::Var f = ad::sigmoid(ad::matmul(hx, w.W_f) + w.b_f);
    const ad::Var i = ad::sigmoid(ad::matmul(hx, w.W_i) + w.b_i);
    const ad::Var candidate = ad::tanh(ad::matmul(hx, w.W_C) + w.b_C);
    const ad::Var c = ad::cwise_product(f, prev.c) + ad::cwise_product(i, candidate);
    const ad::Var o = ad::sigmoid(ad::matmul(hx, w.W_o) + w.b_o);
    const ad::Var h = ad::cwise_product(o, ad::tanh(c));
    return {h, c};
}

SequenceBatch make_batch(std::span<const Matrix> sequences) {
    if (sequences.empty()) throw ValidationError("empty batch");
    const Eigen::Index D = sequences.front().cols();
    Eigen::Index T = 0;
    for (const auto& s : sequences) {
        if (s.rows() == 0) throw ValidationError("zero-length sequence");
        if (s.cols() != D) throw ShapeError("sequence widths differ: " + shape_string(s) + " vs " + std::to_string(D));
        T = std::max(T, s.rows());
    }
    const auto B = static_cast<Eigen::Index>(sequences.size());
    SequenceBatch batch;
    batch.steps.assign(static_cast<std::size_t>(T), Matrix::Zero(B, D));
    batch.mask = BinaryMatrix::Zero(B, T);
    for (Eigen::Index b = 0; b < B; ++b) {
        const Matrix& s = sequences[static_cast<std::size_t>(b)];
        for (Eigen::Index t = 0; t < s.rows(); ++t) {
            batch.steps[static_cast<std::size_t>(t)].row(b) = s.row(t);
            batch.mask(b, t) = 1;
        }
        batch.lengths.push_back(static_cast<std::size_t>(s.rows()));
    }
    return batch;
}

std::vector<Eigen::Index> lookup_rows(const EmbeddingTable& table, const text::TokenSequence& doc,
                                      std::size_t max_len) {
    std::vector<Eigen::Index> rows;
    for (std::size_t t = 0; t < std::min(doc.size(), max_len); ++t) rows.push_back(table.row_of(doc[t]).value_or(-1));
    if (rows.empty()) rows.push_back(-1);
    return rows;
}

SequenceBatch make_batch(const EmbeddingTable& table, std::span<const std::vector<Eigen::Index>> docs,
                         std::span<const std::size_t> which) {
    if (which.empty()) throw ValidationError("empty batch");
    const auto D = static_cast<Eigen::Index>(table.dimension());
    const auto B = static_cast<Eigen::Index>(which.size());
    std::size_t T = 0;
    for (std::size_t i : which) {
        if (docs[i].empty()) throw ValidationError("zero-length sequence");
        T = std::max(T, docs[i].size());
    }
    const auto vectors = table.vectors();
    SequenceBatch batch;
    batch.steps.assign(T, Matrix::Zero(B, D));
    batch.mask = BinaryMatrix::Zero(B, static_cast<Eigen::Index>(T));
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& rows = docs[which[static_cast<std::size_t>(b)]];
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t] >= 0) batch.steps[t].row(b) = vectors.row(rows[t]);
            batch.mask(b, static_cast<Eigen::Index>(t)) = 1;
        }
        batch.lengths.push_back(rows.size());
    }
    return batch;
}

AttentionResult attention_pool(std::span<const ad::Var> states, const BinaryMatrix& mask, const ad::Var& W_a) {
    if (states.empty()) throw ValidationError("attention over an empty sequence");
    const Eigen::Index B = states.front().rows();
    const Eigen::Index width = states.front().cols();
    if (mask.rows() != B || mask.cols() != static_cast<Eigen::Index>(states.size()))
        throw ShapeError("attention mask " + shape_string(mask) + " for " + std::to_string(B) + " rows and " +
                         std::to_string(states.size()) + " steps");
    if (W_a.rows() != width || W_a.cols() != width)
        throw ShapeError("attention matrix " + shape_string(W_a.value()) + " for states of width " +
                         std::to_string(width));
    std::vector<ad::Var> scores;
    scores.reserve(states.size());
    for (const auto& h : states) scores.push_back(ad::row_sum(ad::cwise_product(ad::matmul(h, W_a), h)));
    const ad::Var alphas = ad::softmax(ad::concat_cols(scores), ad::Axis::kRowwise, &mask);
    // Sequential accumulation: masked steps add exact zeros.
    ad::Var context = ad::scale_rows(states[0], ad::column(alphas, 0));
    for (std::size_t t = 1; t < states.size(); ++t)
        context = context + ad::scale_rows(states[t], ad::column(alphas, static_cast<Eigen::Index>(t)));
    return {context, alphas};
}

ad::Var classify(const ad::Var& context, const ad::Var& W, const ad::Var& b) {
    if (W.rows() != context.cols() || b.rows() != 1 || b.cols() != W.cols())
        throw ShapeError("classify: context " + shape_string(context.value()) + ", W " + shape_string(W.value()) +
                         ", b " + shape_string(b.value()));
    return ad::sigmoid(ad::matmul(context, W) + b);
}

std::string BiLstmModel::gate_name(std::size_t layer, bool backward, std::string_view gate) {
    return "l" + std::to_string(layer) + (backward ? ".bwd." : ".fwd.") + std::string(gate);
}

BiLstmModel::BiLstmModel(const BiLstmConfig& config, ad::Rng& rng) : config_(config) {
    check_config(config_);
    const auto H = static_cast<Eigen::Index>(config_.hidden);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const auto fan_in = H + static_cast<Eigen::Index>(layer_input_dim(config_, l));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (bool backward : {false, true}) {
            for (auto g : kGates) {
                params_.add(gate_name(l, backward, "W_" + std::string(g)), uniform_matrix(fan_in, H, bound, rng));
                params_.add(gate_name(l, backward, "b_" + std::string(g)), Matrix::Zero(1, H));
            }
        }
    }
    params_.add("attn.W_a", 0.01 * Matrix::Identity(2 * H, 2 * H));
    params_.add("out.W", uniform_matrix(2 * H, static_cast<Eigen::Index>(config_.num_labels),
                                        1.0 / std::sqrt(static_cast<double>(2 * H)), rng));
    params_.add("out.b", Matrix::Zero(1, static_cast<Eigen::Index>(config_.num_labels)));
}

BiLstmModel::BiLstmModel(const BiLstmConfig& config, ad::ParameterSet params)
    : config_(config), params_(std::move(params)) {
    check_config(config_);
    const auto H = static_cast<Eigen::Index>(config_.hidden);
    std::size_t expected = 0;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const auto fan_in = H + static_cast<Eigen::Index>(layer_input_dim(config_, l));
        for (bool backward : {false, true}) {
            for (auto g : kGates) {
                check_param(params_, gate_name(l, backward, "W_" + std::string(g)), fan_in, H);
                check_param(params_, gate_name(l, backward, "b_" + std::string(g)), 1, H);
                expected += 2;
            }
        }
    }
    check_param(params_, "attn.W_a", 2 * H, 2 * H);
    check_param(params_, "out.W", 2 * H, static_cast<Eigen::Index>(config_.num_labels));
    check_param(params_, "out.b", 1, static_cast<Eigen::Index>(config_.num_labels));
    expected += 3;
    if (params_.size() != expected)
        throw ShapeError("checkpoint has " + std::to_string(params_.size()) + " parameters, expected " +
                         std::to_string(expected));
}

ForwardResult BiLstmModel::run(ad::Tape& tape, const SequenceBatch& batch, const ParamLeaf& leaf, bool training,
                               ad::Rng* rng) const {
    const auto B = static_cast<Eigen::Index>(batch.batch_size());
    const std::size_t T = batch.time_steps();
    if (B == 0 || T == 0) throw ValidationError("empty batch");
    if (T > config_.max_len)
        throw ShapeError("batch has " + std::to_string(T) + " steps, max_len is " + std::to_string(config_.max_len));
    if (batch.mask.rows() != B || batch.mask.cols() != static_cast<Eigen::Index>(T))
        throw ShapeError("batch mask " + shape_string(batch.mask));
    for (const auto& step : batch.steps) {
        if (step.rows() != B || step.cols() != static_cast<Eigen::Index>(config_.embedding_dim))
            throw ShapeError("batch step " + shape_string(step) + ", expected " + std::to_string(B) + "x" +
                             std::to_string(config_.embedding_dim));
    }
    const bool drop = training && config_.dropout > 0.0;
    if (drop && !rng) throw ValidationError("dropout needs a random generator");

    std::vector<ad::Var> keep(T);
    for (std::size_t t = 0; t < T; ++t)
        keep[t] = tape.constant(batch.mask.col(static_cast<Eigen::Index>(t)).cast<double>());

    std::vector<ad::Var> inputs(T);
    for (std::size_t t = 0; t < T; ++t) inputs[t] = tape.constant(batch.steps[t]);

    const auto H = static_cast<Eigen::Index>(config_.hidden);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        if (drop) {
            for (auto& x : inputs) x = ad::dropout(x, config_.dropout, *rng, true);
        }
        std::vector<ad::Var> halves[2];
        for (bool backward : {false, true}) {
            auto bind = [&](std::string_view kind, std::string_view g) {
                return leaf(gate_name(l, backward, std::string(kind) + std::string(g)));
            };
            const LstmWeights w{bind("W_", "f"), bind("W_", "i"), bind("W_", "C"), bind("W_", "o"),
                                bind("b_", "f"), bind("b_", "i"), bind("b_", "C"), bind("b_", "o")};
            const ad::Var zero = tape.constant(Matrix::Zero(B, H));
            LstmState state{zero, zero};
            auto& out = halves[backward ? 1 : 0];
            out.resize(T);
            // Padding is a suffix, so zeroing the state at masked steps keeps
            // padded outputs at zero and leaves the backward pass starting
            // from a zero state at each sequence's true end.
            for (std::size_t s = 0; s < T; ++s) {
                const std::size_t t = backward ? T - 1 - s : s;
                const LstmState next = lstm_cell(inputs[t], state, w);
                state = {ad::scale_rows(next.h, keep[t]), ad::scale_rows(next.c, keep[t])};
                out[t] = state.h;
            }
        }
        for (std::size_t t = 0; t < T; ++t) inputs[t] = ad::concat_cols(halves[0][t], halves[1][t]);
    }

    ForwardResult result;
    result.states = inputs;
    result.attention = attention_pool(result.states, batch.mask, leaf("attn.W_a"));
    ad::Var context = result.attention.context;
    if (drop) context = ad::dropout(context, config_.dropout, *rng, true);
    result.probs = classify(context, leaf("out.W"), leaf("out.b"));
    return result;
}

ForwardResult BiLstmModel::forward(ad::Tape& tape, const SequenceBatch& batch, bool training, ad::Rng& rng) {
    return run(tape, batch, [&](std::string_view name) { return tape.parameter(params_[name]); }, training, &rng);
}

ForwardResult BiLstmModel::forward_constant(ad::Tape& tape, const SequenceBatch& batch) const {
    return run(tape, batch, [&](std::string_view name) { return tape.constant(params_[name].value); }, false,
               nullptr);
}

Matrix BiLstmModel::predict(const SequenceBatch& batch) const {
    ad::Tape tape;
    tape.set_grad_enabled(false);
    return forward_constant(tape, batch).probs.value();
}

void BiLstmModel::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    params_.save((std::filesystem::path(dir) / "params.bin").string());
    config_.save((std::filesystem::path(dir) / "manifest.txt").string());
}

BiLstmModel BiLstmModel::load(const std::string& dir) {
    const auto config = BiLstmConfig::load((std::filesystem::path(dir) / "manifest.txt").string());
    return BiLstmModel(config, ad::ParameterSet::load((std::filesystem::path(dir) / "params.bin").string()));
}

Matrix bilstm_encode(const BiLstmModel& model, const Matrix& sequence, std::size_t length) {
    if (length == 0) throw ValidationError("zero-length sequence");
    if (length > static_cast<std::size_t>(sequence.rows()))
        throw ShapeError("length " + std::to_string(length) + " exceeds " + std::to_string(sequence.rows()) + " rows");
    const Matrix trimmed = sequence.topRows(static_cast<Eigen::Index>(length));
    const SequenceBatch batch = make_batch(std::span<const Matrix>(&trimmed, 1));
    ad::Tape tape;
    tape.set_grad_enabled(false);
    const ForwardResult r = model.forward_constant(tape, batch);
    Matrix H(static_cast<Eigen::Index>(length), r.states.front().cols());
    for (std::size_t t = 0; t < length; ++t) H.row(static_cast<Eigen::Index>(t)) = r.states[t].value().row(0);
    return H;
}

void write_epoch_log_header(std::ostream& out) { out << "epoch\ttrain_loss\tval_micro_f1\tval_macro_f1\n"; }

void write_epoch_log_row(std::ostream& out, const EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\n", r.epoch, r.train_loss, r.val_micro_f1,
                  r.val_macro_f1);
    out << buf << std::flush;
}

BiLstmTrainResult train_bilstm(const Corpus& train, const Corpus& val, const EmbeddingTable& embeddings,
                               const BiLstmConfig& config, const TrainConfig& tc, const LossConfig& loss,
                               std::ostream* epoch_log) {
    check_config(config);
    check_train_config(tc);
    if (train.empty() || val.empty()) throw ValidationError("training and validation corpora must be non-empty");
    if (embeddings.dimension() != config.embedding_dim)
        throw ShapeError("embeddings have dimension " + std::to_string(embeddings.dimension()) + ", model expects " +
                         std::to_string(config.embedding_dim));
    const BinaryMatrix y_train = train.label_matrix();
    const BinaryMatrix y_val = val.label_matrix();
    if (static_cast<std::size_t>(y_train.cols()) != config.num_labels)
        throw ShapeError("corpus has " + std::to_string(y_train.cols()) + " labels, model " +
                         std::to_string(config.num_labels));

    const auto train_rows = corpus_rows(train, embeddings, config.max_len);
    const auto val_rows = corpus_rows(val, embeddings, config.max_len);

    ad::Rng rng(tc.seed);
    BiLstmModel model(config, rng);
    BiLstmTrainResult result{model, std::nullopt, 0, {}};
    if (epoch_log) write_epoch_log_header(*epoch_log);

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto batches = shuffled_batches(train.size(), tc.batch_size, rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const SequenceBatch batch = make_batch(embeddings, train_rows, batches[b]);
            const BinaryMatrix targets = gather_rows(y_train, batches[b]);
            const double value = train_step(
                model.params(), tc, loss, targets,
                [&](ad::Tape& tape) { return model.forward(tape, batch, true, rng).probs; }, epoch, b + 1);
            loss_sum += value * static_cast<double>(batches[b].size());
        }
        const Matrix val_probs = predict_rows(model, embeddings, val_rows, tc.batch_size);
        const EpochRecord record =
            score_epoch(epoch, loss_sum / static_cast<double>(train.size()), val_probs, y_val, tc.val_threshold);
        result.log.push_back(record);
        if (epoch_log) write_epoch_log_row(*epoch_log, record);
        log_info("epoch " + std::to_string(epoch) + " loss " + std::to_string(record.train_loss) + " val micro-F1 " +
                 std::to_string(record.val_micro_f1) + " macro-F1 " + std::to_string(record.val_macro_f1));
        if (!result.best_model || record.val_macro_f1 > result.log[result.best_epoch - 1].val_macro_f1) {
            result.best_model = model;
            result.best_epoch = epoch;
        }
    }
    result.final_model = std::move(model);
    return result;
}

Matrix predict_corpus(const BiLstmModel& model, const Corpus& corpus, const EmbeddingTable& embeddings,
                      std::size_t batch_size) {
    if (embeddings.dimension() != model.config().embedding_dim)
        throw ShapeError("embeddings have dimension " + std::to_string(embeddings.dimension()) + ", model expects " +
                         std::to_string(model.config().embedding_dim));
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    const auto rows = corpus_rows(corpus, embeddings, model.config().max_len);
    return predict_rows(model, embeddings, rows, batch_size);
}

DenseHead::DenseHead(std::size_t input_dim, std::size_t num_labels) {
    if (input_dim == 0 || num_labels == 0) throw ValidationError("dense head sizes must be positive");
    params_.add("head.W", Matrix::Zero(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(num_labels)));
    params_.add("head.b", Matrix::Zero(1, static_cast<Eigen::Index>(num_labels)));
}

DenseHead::DenseHead(ad::ParameterSet params) : params_(std::move(params)) {
    const ad::Parameter* W = params_.find("head.W");
    if (!W || params_.size() != 2) throw ShapeError("dense head needs exactly head.W and head.b");
    check_param(params_, "head.b", 1, W->value.cols());
}

ad::Var DenseHead::forward(ad::Tape& tape, const Matrix& x) {
    if (x.cols() != W().rows())
        throw ShapeError("summary vectors " + shape_string(x) + " for a head of input " + std::to_string(W().rows()));
    return classify(tape.constant(x), tape.parameter(params_["head.W"]), tape.parameter(params_["head.b"]));
}

Matrix DenseHead::predict(const Matrix& x) const {
    if (x.cols() != W().rows())
        throw ShapeError("summary vectors " + shape_string(x) + " for a head of input " + std::to_string(W().rows()));
    Matrix z = x * W();
    z.rowwise() += b().row(0);
    return z.unaryExpr([](double v) { return stable_sigmoid(v); });
}

HeadTrainResult train_head(const Matrix& X, const BinaryMatrix& Y, const TrainConfig& tc, const LossConfig& loss,
                           const Matrix* X_val, const BinaryMatrix* Y_val, std::ostream* epoch_log) {
    check_train_config(tc);
    if (X.rows() == 0) throw ValidationError("no training vectors");
    if (X.rows() != Y.rows()) throw ShapeError("summary vectors " + shape_string(X) + " vs labels " + shape_string(Y));
    if ((X_val == nullptr) != (Y_val == nullptr)) throw ValidationError("validation vectors and labels go together");
    if (X_val && (X_val->rows() != Y_val->rows() || X_val->cols() != X.cols() || Y_val->cols() != Y.cols()))
        throw ShapeError("validation data " + shape_string(*X_val) + " / " + shape_string(*Y_val));
    if (!X.allFinite()) throw NumericError("summary vectors contain non-finite values");

    HeadTrainResult result{DenseHead(static_cast<std::size_t>(X.cols()), static_cast<std::size_t>(Y.cols())), {}};
    DenseHead& head = result.head;
    ad::Rng rng(tc.seed);
    if (epoch_log) write_epoch_log_header(*epoch_log);
    const auto N = static_cast<std::size_t>(X.rows());
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto batches = shuffled_batches(N, tc.batch_size, rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Matrix xb = gather_rows(X, batches[b]);
            const BinaryMatrix yb = gather_rows(Y, batches[b]);
            const double value = train_step(
                head.params(), tc, loss, yb, [&](ad::Tape& tape) { return head.forward(tape, xb); }, epoch, b + 1);
            loss_sum += value * static_cast<double>(batches[b].size());
        }
        EpochRecord record{epoch, loss_sum / static_cast<double>(N), std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()};
        if (X_val) record = score_epoch(epoch, record.train_loss, head.predict(*X_val), *Y_val, tc.val_threshold);
        result.log.push_back(record);
        if (epoch_log) write_epoch_log_row(*epoch_log, record);
    }
    return result;
}

}  // namespace goemo
