#include "goemo/selfcheck.hpp"

#include "goemo/bilstm.hpp"
#include "goemo/imbalance.hpp"

namespace goemo {

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, ad::Rng& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

BinaryMatrix random_targets(Eigen::Index rows, Eigen::Index cols, ad::Rng& rng) {
    std::bernoulli_distribution coin(0.3);
    BinaryMatrix y(rows, cols);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = coin(rng) ? 1 : 0;
    return y;
}

ClassWeights random_weights(Eigen::Index k, ad::Rng& rng) {
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    Vector w(k);
    for (Eigen::Index i = 0; i < k; ++i) w(i) = dist(rng);
    return ClassWeights(std::move(w));
}

// Probabilities kept away from the clamp so the loss is smooth.
ad::Var squash(const ad::Var& x) { return ad::sigmoid(x); }

}  // namespace

ad::GradCheckResult check_bilstm_gradients(const BiLstmGradCheckShape& shape, std::uint64_t seed, double epsilon) {
    ad::Rng rng(seed);
    BiLstmConfig config;
    config.layers = shape.layers;
    config.hidden = shape.hidden;
    config.embedding_dim = shape.embedding_dim;
    config.num_labels = shape.num_labels;
    config.dropout = 0.0;
    config.max_len = 128;
    BiLstmModel model(config, rng);
    // Move biases and the attention matrix off their special initial values
    // so every code path carries a generic gradient.
    for (auto& p : model.params()) p->value += random_matrix(p->value.rows(), p->value.cols(), 1.0, rng);

    std::vector<Matrix> sequences;
    for (std::size_t len : shape.lengths)
        sequences.push_back(random_matrix(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(config.embedding_dim), 2.0, rng));
    const SequenceBatch batch = make_batch(sequences);
    const BinaryMatrix targets =
        random_targets(static_cast<Eigen::Index>(shape.lengths.size()), static_cast<Eigen::Index>(config.num_labels), rng);
    const ClassWeights alpha = random_weights(static_cast<Eigen::Index>(config.num_labels), rng);

    ad::Rng unused(0);
    auto loss = [&](ad::Tape& tape) {
        const ForwardResult r = model.forward(tape, batch, false, unused);
        return ad::focal_loss(r.probs, targets, &alpha, shape.gamma);
    };
    ad::GradCheckOptions options;
    options.epsilon = epsilon;
    return ad::grad_check(loss, model.params(), options);
}

std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed) {
    std::vector<NamedGradCheck> out;
    ad::Rng rng(seed);

    {
        ad::ParameterSet params;
        const Eigen::Index B = 2, D = 3, H = 4;
        for (const char* g : {"f", "i", "C", "o"}) {
            params.add(std::string("W_") + g, random_matrix(H + D, H, 0.5, rng));
            params.add(std::string("b_") + g, random_matrix(1, H, 0.5, rng));
        }
        const Matrix x = random_matrix(B, D, 1.0, rng);
        const Matrix h0 = random_matrix(B, H, 0.5, rng);
        const Matrix c0 = random_matrix(B, H, 0.5, rng);
        const Matrix rh = random_matrix(B, H, 1.0, rng);
        const Matrix rc = random_matrix(B, H, 1.0, rng);
        auto loss = [&](ad::Tape& t) {
            auto p = [&](const std::string& n) { return t.parameter(params[n]); };
            const LstmWeights w{p("W_f"), p("W_i"), p("W_C"), p("W_o"), p("b_f"), p("b_i"), p("b_C"), p("b_o")};
            const LstmState s = lstm_cell(t.constant(x), {t.constant(h0), t.constant(c0)}, w);
            return ad::sum(ad::cwise_product(s.h, t.constant(rh))) + ad::sum(ad::cwise_product(s.c, t.constant(rc)));
        };
        out.push_back({"lstm_cell", ad::grad_check(loss, params)});
    }

    out.push_back({"bilstm_attention_focal", check_bilstm_gradients({}, seed + 1)});
    {
        BiLstmGradCheckShape padded;
        padded.lengths = {4, 2, 3};
        out.push_back({"bilstm_attention_focal_padded", check_bilstm_gradients(padded, seed + 1)});
    }

    const BinaryMatrix targets = random_targets(3, 5, rng);
    const ClassWeights weights = random_weights(5, rng);
    {
        ad::ParameterSet params;
        params.add("logits", random_matrix(3, 5, 2.0, rng));
        auto loss = [&](ad::Tape& t) { return ad::weighted_bce(squash(t.parameter(params["logits"])), targets, &weights); };
        out.push_back({"weighted_bce", ad::grad_check(loss, params)});
    }
    {
        ad::ParameterSet params;
        params.add("logits", random_matrix(3, 5, 2.0, rng));
        auto loss = [&](ad::Tape& t) {
            return ad::focal_loss(squash(t.parameter(params["logits"])), targets, &weights, 2.0);
        };
        out.push_back({"focal", ad::grad_check(loss, params)});
    }
    {
        DenseHead head(6, 5);
        for (auto& p : head.params()) p->value = random_matrix(p->value.rows(), p->value.cols(), 0.5, rng);
        const Matrix x = random_matrix(3, 6, 1.0, rng);
        auto loss = [&](ad::Tape& t) { return ad::focal_loss(head.forward(t, x), targets, &weights, 2.0); };
        out.push_back({"dense_head_focal", ad::grad_check(loss, head.params())});
    }
    return out;
}

}  // namespace goemo
