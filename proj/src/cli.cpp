#include "goemo/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <unordered_set>

#include <CLI11.hpp>

#include "goemo/bilstm.hpp"
#include "goemo/corpus.hpp"
#include "goemo/error.hpp"
#include "goemo/eval.hpp"
#include "goemo/features.hpp"
#include "goemo/imbalance.hpp"
#include "goemo/linear.hpp"
#include "goemo/selfcheck.hpp"
#include "goemo/textprep.hpp"

namespace goemo::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<ConfigKey> kLabelsKey = {{"labels", "", "label names file, one per line (default: built-in 28)"}};

std::vector<ConfigKey> with_common(std::vector<ConfigKey> keys) {
    keys.insert(keys.end(), kLabelsKey.begin(), kLabelsKey.end());
    keys.push_back({"seed", "0", "seed for every random choice"});
    return keys;
}

std::vector<ConfigKey> training_keys() {
    return {{"epochs", "9", "training epochs"},
            {"batch_size", "64", "examples per batch"},
            {"lr", "0.001", "Adam learning rate"},
            {"clip_norm", "5", "global gradient-norm clip (0 disables)"},
            {"loss", "bce", "bce or focal"},
            {"gamma", "2", "focal focusing parameter"},
            {"class_weights", "inverse_frequency", "none, inverse_frequency, or a label<TAB>weight file"}};
}

const std::map<std::string, std::vector<ConfigKey>>& schemas() {
    static const std::map<std::string, std::vector<ConfigKey>> s = [] {
        std::map<std::string, std::vector<ConfigKey>> m;
        m["stats"] = with_common({{"data", "", "comma-separated TSV files; several are combined"},
                                  {"format", "text", "text or json"},
                                  {"top_tokens", "0", "also list this many top tokens per label (text only)"},
                                  {"out", "", "output directory (default: standard output only)"}});
        m["train-lr"] = with_common({{"train", "", "training TSV"},
                                     {"val", "", "validation TSV"},
                                     {"out", "", "output directory"},
                                     {"workers", "0", "labels trained concurrently (0: all cores)"},
                                     {"max_iter", "1000", "iterations per label"},
                                     {"tolerance", "1e-6", "relative objective decrease to stop"},
                                     {"c", "1", "inverse regularization strength; l2 = 1/(c N)"},
                                     {"l2", "", "explicit l2 coefficient, overrides c"},
                                     {"balanced", "true", "balanced per-label example weights"},
                                     {"min_df", "2", "minimum n-gram document frequency"},
                                     {"max_features", "50000", "TF-IDF vocabulary cap"},
                                     {"bigrams", "true", "include bigrams"},
                                     {"l2_normalize", "false", "unit-normalize TF-IDF vectors"}});
        auto bilstm = std::vector<ConfigKey>{{"train", "", "training TSV"},
                                             {"val", "", "validation TSV"},
                                             {"embeddings", "", "GloVe text file"},
                                             {"out", "", "output directory"},
                                             {"embedding_dim", "300", "word vector dimension"},
                                             {"hidden", "256", "LSTM hidden size per direction"},
                                             {"layers", "2", "stacked bidirectional layers"},
                                             {"max_len", "128", "tokens kept per text"},
                                             {"dropout", "0.3", "dropout rate on layer inputs and context"}};
        for (auto& k : training_keys()) bilstm.push_back(k);
        m["train-bilstm"] = with_common(bilstm);
        auto head = std::vector<ConfigKey>{{"train", "", "training TSV (labels and ids)"},
                                           {"val", "", "validation TSV"},
                                           {"train_vectors", "", "summary vectors for train: id v1 ... vd"},
                                           {"val_vectors", "", "summary vectors for val"},
                                           {"vector_dim", "768", "summary vector dimension (0: infer)"},
                                           {"out", "", "output directory"}};
        for (auto& k : training_keys()) head.push_back(k);
        m["train-head"] = with_common(head);
        m["evaluate"] = with_common({{"data", "", "evaluation TSV"},
                                     {"model", "", "directory written by a train command"},
                                     {"predictions", "", "prediction file to score instead of a model"},
                                     {"embeddings", "", "GloVe file (BiLSTM models)"},
                                     {"vectors", "", "summary vectors (dense-head models)"},
                                     {"thresholds", "", "label<TAB>threshold file (default 0.5)"},
                                     {"macro_exclude", "", "comma-separated labels left out of macro F1"},
                                     {"format", "text", "report format: text, tsv, or json"},
                                     {"batch_size", "64", "inference batch size"},
                                     {"out", "", "output directory for report and predictions"}});
        m["tune-thresholds"] = with_common({{"predictions", "", "validation prediction file"},
                                            {"data", "", "validation TSV"},
                                            {"grid", "", "comma-separated thresholds (default 0.05..0.95)"},
                                            {"workers", "1", "labels searched concurrently"},
                                            {"out", "", "output directory"}});
        m["gradcheck"] = with_common({{"tolerance", "1e-4", "maximum relative error"},
                                      {"out", "", "output directory (optional)"}});
        return m;
    }();
    return s;
}

LabelVocabulary label_vocab(const RunConfig& cfg) {
    return cfg.has("labels") ? LabelVocabulary::load(cfg.get("labels")) : LabelVocabulary::goemotions();
}

void require_file(const RunConfig& cfg, const std::string& key) {
    const std::string& path = cfg.require(key);
    if (!fs::is_regular_file(path)) throw Error("input file for '" + key + "' not found: " + path);
}

void require_dir(const RunConfig& cfg, const std::string& key) {
    const std::string& path = cfg.require(key);
    if (!fs::is_directory(path)) throw Error("directory for '" + key + "' not found: " + path);
}

// Creates the output directory and records the resolved config in it.
fs::path prepare_out(const RunConfig& cfg) {
    const fs::path dir = cfg.require("out");
    fs::create_directories(dir);
    cfg.save((dir / "config.txt").string());
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::vector<text::TokenSequence> tokenize_corpus(const Corpus& corpus) {
    std::vector<text::TokenSequence> docs;
    docs.reserve(corpus.size());
    for (const auto& ex : corpus.examples()) docs.push_back(text::preprocess(ex.text));
    return docs;
}

SparseMatrix tfidf_matrix(const TfidfModel& model, std::span<const text::TokenSequence> docs) {
    std::vector<SparseVector> rows;
    rows.reserve(docs.size());
    for (const auto& d : docs) rows.push_back(model.transform(d));
    return stack_rows(rows, model.dimension());
}

PredictionMatrix with_ids(const Corpus& corpus, Matrix probs) {
    PredictionMatrix p;
    for (const auto& ex : corpus.examples()) p.ids.push_back(ex.id);
    p.probs = std::move(probs);
    return p;
}

void print_aggregates(std::ostream& out, const Matrix& probs, const BinaryMatrix& gold, const LabelVocabulary& vocab) {
    const auto pred = binarize(probs, Thresholds::uniform(vocab.size()));
    out << render_aggregates(build_report(pred, gold, vocab));
}

LossConfig loss_config(const RunConfig& cfg, const Corpus& train, const LabelVocabulary& vocab, const fs::path& dir) {
    LossConfig loss;
    loss.kind = parse_loss_kind(cfg.require("loss"));
    loss.gamma = cfg.get_double("gamma");
    if (!(loss.gamma >= 0.0)) throw ValidationError("gamma must be >= 0");
    const std::string& weights = cfg.require("class_weights");
    if (weights == "inverse_frequency") {
        loss.weights = inverse_frequency_weights(compute_stats(train), &vocab);
    } else if (weights != "none") {
        loss.weights = ClassWeights::load(weights, vocab);
    }
    if (loss.weights) loss.weights->save((dir / "class_weights.tsv").string(), vocab);
    return loss;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.get_size("epochs");
    tc.batch_size = cfg.get_size("batch_size");
    tc.adam.lr = cfg.get_double("lr");
    tc.clip_norm = cfg.get_double("clip_norm");
    tc.seed = cfg.get_u64("seed");
    return tc;
}

std::unordered_set<std::string> corpus_tokens(std::initializer_list<const Corpus*> corpora) {
    std::unordered_set<std::string> keep;
    for (const Corpus* c : corpora) {
        for (const auto& ex : c->examples()) {
            for (auto& tok : text::preprocess(ex.text)) keep.insert(std::move(tok));
        }
    }
    return keep;
}

Split split_from_path(const std::string& path) {
    try {
        return parse_split(fs::path(path).stem().string());
    } catch (const Error&) {
        return Split::kTrain;
    }
}

// The split is taken from the file name (train.tsv, dev.tsv, ...) when it names one.
Corpus read_corpus_file(const std::string& path, const LabelVocabulary& vocab) {
    return load_corpus(path, vocab, to_string(split_from_path(path)));
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
    const auto files = cfg.get_list("data");
    if (files.empty()) throw ValidationError("config key 'data' is required for stats");
    for (const auto& f : files) {
        if (!fs::is_regular_file(f)) throw Error("input file for 'data' not found: " + f);
    }
    const std::string format = cfg.require("format");
    if (format != "text" && format != "json") throw ValidationError("stats format must be text or json");
    const std::size_t top = cfg.get_size("top_tokens");
    const auto vocab = label_vocab(cfg);

    std::vector<Corpus> parts;
    for (const auto& f : files) parts.push_back(read_corpus_file(f, vocab));
    std::optional<Corpus> combined;
    if (parts.size() > 1) {
        std::vector<const Corpus*> ptrs;
        for (const auto& p : parts) ptrs.push_back(&p);
        combined = Corpus::combine(ptrs);
    }
    const Corpus& corpus = combined ? *combined : parts.front();
    const CorpusStats stats = compute_stats(corpus);

    std::string rendered = format == "json" ? render_stats_json(stats, vocab) : render_stats_text(stats, vocab);
    if (format == "text" && top > 0) {
        std::ostringstream extra;
        for (std::size_t k = 0; k < vocab.size(); ++k) {
            extra << "top_tokens." << vocab.name(k);
            for (const auto& [tok, n] : top_tokens_per_label(corpus, k, top)) extra << ' ' << tok << ':' << n;
            extra << '\n';
        }
        rendered += extra.str();
    }
    out << rendered;
    if (cfg.has("out")) {
        const fs::path dir = prepare_out(cfg);
        open_out(dir / (format == "json" ? "stats.json" : "stats.txt")) << rendered;
    }
    return 0;
}

int cmd_train_lr(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg, "train");
    require_file(cfg, "val");
    const auto vocab = label_vocab(cfg);
    TfidfConfig tf;
    tf.min_df = cfg.get_size("min_df");
    tf.max_features = cfg.get_size("max_features");
    tf.bigrams = cfg.get_bool("bigrams");
    tf.l2_normalize = cfg.get_bool("l2_normalize");
    LinearConfig lc;
    lc.max_iter = cfg.get_size("max_iter");
    lc.tolerance = cfg.get_double("tolerance");
    lc.c = cfg.get_double("c");
    if (cfg.has("l2")) lc.l2 = cfg.get_double("l2");
    if (!(lc.c > 0.0)) throw ValidationError("c must be positive");
    lc.balanced = cfg.get_bool("balanced");
    lc.workers = cfg.get_size("workers");
    const Corpus train = load_corpus(cfg.get("train"), vocab, "train");
    const Corpus val = load_corpus(cfg.get("val"), vocab, "validation");
    const fs::path dir = prepare_out(cfg);

    log_info("fitting TF-IDF on " + std::to_string(train.size()) + " texts");
    const auto train_docs = tokenize_corpus(train);
    const TfidfModel tfidf = TfidfModel::fit(train_docs, tf);
    const SparseMatrix X = tfidf_matrix(tfidf, train_docs);
    log_info("training " + std::to_string(vocab.size()) + " classifiers over " + std::to_string(tfidf.dimension()) +
             " features");
    std::vector<LabelFitTrace> traces;
    const LinearModel model = train_binary_relevance(X, train.label_matrix(), lc, &traces);
    tfidf.save((dir / "tfidf.txt").string());
    model.save((dir / "model.txt").string());

    auto log = open_out(dir / "train_log.tsv");
    log << "label\titerations\tconverged\tdegenerate\tinitial_objective\tfinal_objective\n";
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const auto& t = traces[k];
        char buf[96];
        const double first = t.objective.empty() ? 0.0 : t.objective.front();
        const double last = t.objective.empty() ? 0.0 : t.objective.back();
        std::snprintf(buf, sizeof buf, "%.17g\t%.17g", first, last);
        log << vocab.name(k) << '\t' << t.iterations << '\t' << t.converged << '\t' << t.degenerate << '\t' << buf
            << '\n';
    }

    const auto val_docs = tokenize_corpus(val);
    const Matrix val_probs = predict_proba(model, tfidf_matrix(tfidf, val_docs));
    write_predictions((dir / "val_predictions.tsv").string(), with_ids(val, val_probs));
    print_aggregates(out, val_probs, val.label_matrix(), vocab);
    return 0;
}

int cmd_train_bilstm(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg, "train");
    require_file(cfg, "val");
    require_file(cfg, "embeddings");
    const auto vocab = label_vocab(cfg);
    BiLstmConfig mc;
    mc.embedding_dim = cfg.get_size("embedding_dim");
    mc.hidden = cfg.get_size("hidden");
    mc.layers = cfg.get_size("layers");
    mc.max_len = cfg.get_size("max_len");
    mc.dropout = cfg.get_double("dropout");
    mc.num_labels = vocab.size();
    const TrainConfig tc = train_config(cfg);
    const Corpus train = load_corpus(cfg.get("train"), vocab, "train");
    const Corpus val = load_corpus(cfg.get("val"), vocab, "validation");
    const fs::path dir = prepare_out(cfg);
    const LossConfig loss = loss_config(cfg, train, vocab, dir);

    const auto keep = corpus_tokens({&train, &val});
    log_info("loading embeddings for " + std::to_string(keep.size()) + " distinct tokens");
    const EmbeddingTable table = EmbeddingTable::load(cfg.get("embeddings"), mc.embedding_dim, &keep);
    log_info(std::to_string(table.size()) + " tokens have pretrained vectors");

    auto epoch_log = open_out(dir / "epoch_log.tsv");
    BiLstmTrainResult result = train_bilstm(train, val, table, mc, tc, loss, &epoch_log);
    result.final_model.save((dir / "final").string());
    const BiLstmModel& best = result.best_model ? *result.best_model : result.final_model;
    best.save((dir / "best").string());
    log_info("best validation macro-F1 at epoch " + std::to_string(result.best_epoch));

    const Matrix val_probs = predict_corpus(best, val, table, tc.batch_size);
    write_predictions((dir / "val_predictions.tsv").string(), with_ids(val, val_probs));
    print_aggregates(out, val_probs, val.label_matrix(), vocab);
    return 0;
}

int cmd_train_head(const RunConfig& cfg, std::ostream& out) {
    for (const char* key : {"train", "val", "train_vectors", "val_vectors"}) require_file(cfg, key);
    const auto vocab = label_vocab(cfg);
    const TrainConfig tc = train_config(cfg);
    const std::size_t dim = cfg.get_size("vector_dim");
    const Corpus train = load_corpus(cfg.get("train"), vocab, "train");
    const Corpus val = load_corpus(cfg.get("val"), vocab, "validation");
    const fs::path dir = prepare_out(cfg);
    const LossConfig loss = loss_config(cfg, train, vocab, dir);

    const Matrix X = load_summary_vectors(cfg.get("train_vectors"), train, dim);
    const Matrix X_val = load_summary_vectors(cfg.get("val_vectors"), val, static_cast<std::size_t>(X.cols()));
    const BinaryMatrix Y = train.label_matrix();
    const BinaryMatrix Y_val = val.label_matrix();
    auto epoch_log = open_out(dir / "epoch_log.tsv");
    const HeadTrainResult result = train_head(X, Y, tc, loss, &X_val, &Y_val, &epoch_log);
    result.head.save((dir / "head.bin").string());

    const Matrix val_probs = result.head.predict(X_val);
    write_predictions((dir / "val_predictions.tsv").string(), with_ids(val, val_probs));
    print_aggregates(out, val_probs, Y_val, vocab);
    return 0;
}

// Probabilities from whichever model kind `dir` holds.
PredictionMatrix model_predictions(const RunConfig& cfg, const Corpus& corpus) {
    const fs::path dir = cfg.get("model");
    if (fs::is_regular_file(dir / "model.txt") && fs::is_regular_file(dir / "tfidf.txt")) {
        const TfidfModel tfidf = TfidfModel::load((dir / "tfidf.txt").string());
        const LinearModel model = LinearModel::load((dir / "model.txt").string());
        if (model.num_labels() != corpus.vocab().size())
            throw ShapeError("model has " + std::to_string(model.num_labels()) + " labels, data has " +
                             std::to_string(corpus.vocab().size()));
        const auto docs = tokenize_corpus(corpus);
        return with_ids(corpus, predict_proba(model, tfidf_matrix(tfidf, docs)));
    }
    const fs::path ckpt = fs::is_regular_file(dir / "manifest.txt") ? dir : dir / "best";
    if (fs::is_regular_file(ckpt / "manifest.txt")) {
        require_file(cfg, "embeddings");
        const BiLstmModel model = BiLstmModel::load(ckpt.string());
        if (model.config().num_labels != corpus.vocab().size())
            throw ShapeError("model has " + std::to_string(model.config().num_labels) + " labels, data has " +
                             std::to_string(corpus.vocab().size()));
        const auto keep = corpus_tokens({&corpus});
        const EmbeddingTable table = EmbeddingTable::load(cfg.get("embeddings"), model.config().embedding_dim, &keep);
        return with_ids(corpus, predict_corpus(model, corpus, table, cfg.get_size("batch_size")));
    }
    if (fs::is_regular_file(dir / "head.bin")) {
        require_file(cfg, "vectors");
        const DenseHead head = DenseHead::load((dir / "head.bin").string());
        if (head.num_labels() != corpus.vocab().size())
            throw ShapeError("head has " + std::to_string(head.num_labels()) + " labels, data has " +
                             std::to_string(corpus.vocab().size()));
        return with_ids(corpus, head.predict(load_summary_vectors(cfg.get("vectors"), corpus, head.input_dim())));
    }
    throw Error("no model found in " + dir.string() + " (expected model.txt, manifest.txt, or head.bin)");
}

std::vector<std::size_t> excluded_labels(const RunConfig& cfg, const LabelVocabulary& vocab) {
    std::vector<std::size_t> out;
    for (const auto& name : cfg.get_list("macro_exclude")) out.push_back(vocab.index_of(name));
    return out;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg, "data");
    if (cfg.has("predictions") == cfg.has("model"))
        throw ValidationError("evaluate needs exactly one of 'model' or 'predictions'");
    if (cfg.has("predictions")) require_file(cfg, "predictions");
    if (cfg.has("model")) require_dir(cfg, "model");
    if (cfg.has("thresholds")) require_file(cfg, "thresholds");
    const ReportFormat format = parse_report_format(cfg.require("format"));
    const auto vocab = label_vocab(cfg);
    const auto exclude = excluded_labels(cfg, vocab);
    const Corpus corpus = load_corpus(cfg.get("data"), vocab, "test");

    const PredictionMatrix predictions = cfg.has("predictions") ? read_predictions(cfg.get("predictions"), vocab.size())
                                                                : model_predictions(cfg, corpus);
    const BinaryMatrix gold = aligned_gold(corpus, predictions.ids);
    const Thresholds thresholds =
        cfg.has("thresholds") ? Thresholds::load(cfg.get("thresholds"), vocab) : Thresholds::uniform(vocab.size());
    const MetricsReport report = build_report(binarize(predictions.probs, thresholds), gold, vocab, exclude);

    out << render_aggregates(report);
    const std::string rendered = render_report(report, format);
    if (cfg.has("out")) {
        const fs::path dir = prepare_out(cfg);
        const char* ext = format == ReportFormat::kJson ? "json" : format == ReportFormat::kTsv ? "tsv" : "txt";
        open_out(dir / (std::string("report.") + ext)) << rendered;
        if (cfg.has("model")) write_predictions((dir / "predictions.tsv").string(), predictions);
    } else {
        out << '\n' << rendered;
    }
    return 0;
}

int cmd_tune_thresholds(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg, "predictions");
    require_file(cfg, "data");
    const auto vocab = label_vocab(cfg);
    std::vector<double> grid;
    if (cfg.has("grid")) {
        for (const auto& item : cfg.get_list("grid")) {
            RunConfig one("grid", {{"value", item, ""}});
            grid.push_back(one.get_double("value"));
        }
    } else {
        grid = default_threshold_grid();
    }
    const std::size_t workers = cfg.get_size("workers");
    const PredictionMatrix predictions = read_predictions(cfg.get("predictions"), vocab.size());
    const Corpus val = load_corpus(cfg.get("data"), vocab, "validation");
    const BinaryMatrix gold = aligned_gold(val, predictions.ids);
    const fs::path dir = prepare_out(cfg);

    const Thresholds tuned = tune_thresholds(predictions.probs, gold, grid, workers);
    tuned.save((dir / "thresholds.tsv").string(), vocab);
    const double before = micro_macro(binarize(predictions.probs, Thresholds::uniform(vocab.size())), gold).macro_f1;
    const double after = micro_macro(binarize(predictions.probs, tuned), gold).macro_f1;
    char buf[96];
    std::snprintf(buf, sizeof buf, "default_macro_f1\t%.17g\ntuned_macro_f1\t%.17g\n", before, after);
    out << buf;
    return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
    const double tolerance = cfg.get_double("tolerance");
    const auto results = run_gradient_suite(cfg.get_u64("seed"));
    std::ostringstream table;
    table << "check\tmax_relative_error\tcoordinates\tstatus\n";
    bool ok = true;
    for (const auto& r : results) {
        const bool pass = r.result.max_relative_error < tolerance;
        ok = ok && pass;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3e", r.result.max_relative_error);
        table << r.name << '\t' << buf << '\t' << r.result.coordinates_checked << '\t' << (pass ? "ok" : "FAIL")
              << '\n';
        if (!pass)
        {
            char detail[96];
            std::snprintf(detail, sizeof detail, "analytic %.6e numeric %.6e", r.result.worst_analytic,
                          r.result.worst_numeric);
            log_warning(r.name + ": worst coordinate " + r.result.worst_parameter + "[" +
                        std::to_string(r.result.worst_index) + "] " + detail);
        }
    }
    out << table.str();
    if (cfg.has("out")) open_out(prepare_out(cfg) / "gradcheck.tsv") << table.str();
    return ok ? 0 : static_cast<int>(ExitCode::kNumericalFailure);
}

}  // namespace

std::vector<std::string> command_names() {
    std::vector<std::string> names;
    for (const auto& [name, _] : schemas()) names.push_back(name);
    return names;
}

RunConfig make_config(const std::string& command) {
    const auto it = schemas().find(command);
    if (it == schemas().end()) throw ValidationError("unknown command '" + command + "'");
    return RunConfig(command, it->second);
}

int run_command(const RunConfig& cfg, std::ostream& out) {
    const std::string& c = cfg.command();
    if (c == "stats") return cmd_stats(cfg, out);
    if (c == "train-lr") return cmd_train_lr(cfg, out);
    if (c == "train-bilstm") return cmd_train_bilstm(cfg, out);
    if (c == "train-head") return cmd_train_head(cfg, out);
    if (c == "evaluate") return cmd_evaluate(cfg, out);
    if (c == "tune-thresholds") return cmd_tune_thresholds(cfg, out);
    if (c == "gradcheck") return cmd_gradcheck(cfg, out);
    throw ValidationError("unknown command '" + c + "'");
}

int main(int argc, char** argv) {
    CLI::App app{"Multi-label emotion classification on GoEmotions-format data"};
    app.require_subcommand(1);
    struct Sub {
        CLI::App* app;
        std::string config_file;
        std::map<std::string, std::string> values;
        std::map<std::string, CLI::Option*> options;
    };
    std::map<std::string, std::unique_ptr<Sub>> subs;
    for (const auto& name : command_names()) {
        auto sub = std::make_unique<Sub>();
        sub->app = app.add_subcommand(name);
        sub->app->add_option("--config", sub->config_file, "key=value file; flags override it");
        const RunConfig defaults = make_config(name);
        for (const auto& key : defaults.schema()) {
            std::string help = key.help;
            if (!key.default_value.empty()) help += " [" + key.default_value + "]";
            sub->options[key.name] = sub->app->add_option("--" + key.name, sub->values[key.name], help);
        }
        subs.emplace(name, std::move(sub));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kInputError);
    }

    try {
        for (const auto& [name, sub] : subs) {
            if (!sub->app->parsed()) continue;
            RunConfig cfg = make_config(name);
            if (!sub->config_file.empty()) cfg.load_file(sub->config_file);
            for (const auto& [key, opt] : sub->options) {
                if (opt->count() > 0) cfg.set(key, sub->values[key]);
            }
            return run_command(cfg, std::cout);
        }
        return static_cast<int>(ExitCode::kInputError);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kInputError);
    }
}

}  // namespace goemo::cli
