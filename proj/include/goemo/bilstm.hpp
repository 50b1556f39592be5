#pragma once

// BiLSTM with quadratic self-attention pooling over frozen word vectors,
// and a single dense sigmoid layer over precomputed summary vectors.
//
// Conventions: activations are row vectors, one row per example. Gate
// matrices are (hidden + input) x hidden and act on [h_prev, x_t].

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "goemo/autodiff.hpp"
#include "goemo/corpus.hpp"
#include "goemo/dense.hpp"
#include "goemo/features.hpp"
#include "goemo/imbalance.hpp"

namespace goemo {

struct BiLstmConfig {
    std::size_t embedding_dim = 300;
    std::size_t hidden = 256;
    std::size_t layers = 2;
    std::size_t max_len = 128;
    double dropout = 0.3;
    std::size_t num_labels = kNumLabels;

    /// Key=value lines; see README.
    void save(const std::string& path) const;
    static BiLstmConfig load(const std::string& path);
};

struct TrainConfig {
    std::size_t epochs = 9;
    std::size_t batch_size = 64;
    ad::AdamConfig adam;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
    /// Threshold used for the per-epoch validation metrics.
    double val_threshold = 0.5;
};

/// Gate weights of one LSTM direction, bound to a tape.
struct LstmWeights {
    ad::Var W_f, W_i, W_C, W_o;
    ad::Var b_f, b_i, b_C, b_o;
};

struct LstmState {
    ad::Var h;
    ad::Var c;
};

/// One step for a batch of rows:
///   f = sigmoid([h, x] W_f + b_f)     i = sigmoid([h, x] W_i + b_i)
///   C~ = tanh([h, x] W_C + b_C)       C = f * C_prev + i * C~
///   o = sigmoid([h, x] W_o + b_o)     h = o * tanh(C)
LstmState lstm_cell(const ad::Var& x, const LstmState& prev, const LstmWeights& w);

/// Fixed-length batch of variable-length sequences, time-major.
struct SequenceBatch {
    std::vector<Matrix> steps;  // T entries, each B x D; padded rows are zero
    BinaryMatrix mask;          // B x T
    std::vector<std::size_t> lengths;

    std::size_t batch_size() const noexcept { return lengths.size(); }
    std::size_t time_steps() const noexcept { return steps.size(); }
};

/// Pads `sequences` (each length x D, length >= 1) to the longest one.
SequenceBatch make_batch(std::span<const Matrix> sequences);

/// Table rows of the first max_len tokens; -1 marks tokens absent from the
/// table. A document without tokens becomes a single absent token.
std::vector<Eigen::Index> lookup_rows(const EmbeddingTable& table, const text::TokenSequence& doc,
                                      std::size_t max_len);

/// Gathers the rows of the chosen documents into a padded batch.
SequenceBatch make_batch(const EmbeddingTable& table, std::span<const std::vector<Eigen::Index>> docs,
                         std::span<const std::size_t> which);

/// Supplies the tape leaf for a named parameter.
using ParamLeaf = std::function<ad::Var(std::string_view)>;

struct AttentionResult {
    ad::Var context;  // B x 2H
    ad::Var alphas;   // B x T, zero at masked positions
};

/// score_t = h_t^T W_a h_t, alpha = masked softmax over time,
/// context = sum_t alpha_t h_t.
AttentionResult attention_pool(std::span<const ad::Var> states, const BinaryMatrix& mask, const ad::Var& W_a);

/// sigmoid(c W + b), independent per label.
ad::Var classify(const ad::Var& context, const ad::Var& W, const ad::Var& b);

struct ForwardResult {
    std::vector<ad::Var> states;  // top-layer outputs per time step, B x 2H
    AttentionResult attention;
    ad::Var probs;  // B x K
};

class BiLstmModel {
   public:
    /// Fresh model: gate and output matrices uniform in +-1/sqrt(fan_in),
    /// biases zero, W_a = 0.01 I.
    BiLstmModel(const BiLstmConfig& config, ad::Rng& rng);
    /// Wraps trained parameters; throws ShapeError if any is missing or
    /// misshapen.
    BiLstmModel(const BiLstmConfig& config, ad::ParameterSet params);

    const BiLstmConfig& config() const noexcept { return config_; }
    ad::ParameterSet& params() noexcept { return params_; }
    const ad::ParameterSet& params() const noexcept { return params_; }

    static std::string gate_name(std::size_t layer, bool backward, std::string_view gate);

    /// Forward pass with trainable parameters on `tape`. Dropout is active
    /// only when `training`.
    ForwardResult forward(ad::Tape& tape, const SequenceBatch& batch, bool training, ad::Rng& rng);
    /// Inference without dropout; parameters enter the tape as constants.
    ForwardResult forward_constant(ad::Tape& tape, const SequenceBatch& batch) const;
    Matrix predict(const SequenceBatch& batch) const;

    /// `dir/params.bin` and `dir/manifest.txt`.
    void save(const std::string& dir) const;
    static BiLstmModel load(const std::string& dir);

   private:
    ForwardResult run(ad::Tape& tape, const SequenceBatch& batch, const ParamLeaf& leaf, bool training,
                      ad::Rng* rng) const;

    BiLstmConfig config_;
    ad::ParameterSet params_;
};

/// Value-level encoder for a single sequence: length x 2H, dropout off.
Matrix bilstm_encode(const BiLstmModel& model, const Matrix& sequence, std::size_t length);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_micro_f1 = 0.0;
    double val_macro_f1 = 0.0;
};

/// Tab-separated epoch log with a header row.
void write_epoch_log_header(std::ostream& out);
void write_epoch_log_row(std::ostream& out, const EpochRecord& record);

struct BiLstmTrainResult {
    BiLstmModel final_model;
    std::optional<BiLstmModel> best_model;  // highest validation macro F1
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> log;
};

/// Mini-batch Adam with embeddings frozen. Throws NumericError naming the
/// epoch and batch on a non-finite loss or gradient.
BiLstmTrainResult train_bilstm(const Corpus& train, const Corpus& val, const EmbeddingTable& embeddings,
                               const BiLstmConfig& config, const TrainConfig& train_config, const LossConfig& loss,
                               std::ostream* epoch_log = nullptr);

/// Probabilities for every example of `corpus`, in corpus order.
Matrix predict_corpus(const BiLstmModel& model, const Corpus& corpus, const EmbeddingTable& embeddings,
                      std::size_t batch_size = 64);

/// z = x W + b followed by an elementwise sigmoid.
class DenseHead {
   public:
    /// Zero-initialized d x K head.
    DenseHead(std::size_t input_dim, std::size_t num_labels);
    explicit DenseHead(ad::ParameterSet params);

    std::size_t input_dim() const { return static_cast<std::size_t>(params_["head.W"].value.rows()); }
    std::size_t num_labels() const { return static_cast<std::size_t>(params_["head.W"].value.cols()); }
    const Matrix& W() const { return params_["head.W"].value; }
    const Matrix& b() const { return params_["head.b"].value; }
    ad::ParameterSet& params() noexcept { return params_; }

    ad::Var forward(ad::Tape& tape, const Matrix& x);
    Matrix predict(const Matrix& x) const;

    void save(const std::string& path) const { params_.save(path); }
    static DenseHead load(const std::string& path) { return DenseHead(ad::ParameterSet::load(path)); }

   private:
    ad::ParameterSet params_;
};

struct HeadTrainResult {
    DenseHead head;
    std::vector<EpochRecord> log;  // validation columns are NaN without validation data
};

HeadTrainResult train_head(const Matrix& X, const BinaryMatrix& Y, const TrainConfig& train_config,
                           const LossConfig& loss, const Matrix* X_val = nullptr, const BinaryMatrix* Y_val = nullptr,
                           std::ostream* epoch_log = nullptr);

}  // namespace goemo
