#include "goemo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "goemo/error.hpp"

namespace goemo {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_shapes(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    if (pred.rows() != gold.rows() || pred.cols() != gold.cols())
        throw ShapeError("predictions " + shape_string(pred) + " vs gold " + shape_string(gold));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view s, const std::string& what, std::size_t line) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw ParseError(what + ": not a number '" + std::string(s) + "'", line);
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

std::vector<bool> exclusion_mask(std::size_t num_labels, std::span<const std::size_t> exclude) {
    std::vector<bool> mask(num_labels, false);
    for (std::size_t k : exclude) {
        if (k >= num_labels) throw ShapeError("excluded label " + std::to_string(k) + " out of range");
        mask[k] = true;
    }
    return mask;
}

// F1 numerator and denominator; a zero denominator is the rational 0/1.
std::pair<std::int64_t, std::int64_t> f1_fraction(const LabelCounts& c) {
    const std::int64_t den = 2 * c.tp + c.fp + c.fn;
    return den == 0 ? std::pair<std::int64_t, std::int64_t>{0, 1} : std::pair{2 * c.tp, den};
}

}  // namespace

void PredictionMatrix::validate() const {
    if (static_cast<Eigen::Index>(ids.size()) != probs.rows())
        throw ShapeError(std::to_string(ids.size()) + " ids for " + std::to_string(probs.rows()) + " prediction rows");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) throw ValidationError("duplicate prediction id: " + id);
    }
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double p = probs(i, k);
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError("probability outside [0, 1] for " + ids[static_cast<std::size_t>(i)]);
        }
    }
}

void write_predictions(const std::string& path, const PredictionMatrix& predictions) {
    predictions.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictions: " + path);
    for (Eigen::Index i = 0; i < predictions.probs.rows(); ++i) {
        out << predictions.ids[static_cast<std::size_t>(i)] << '\t';
        for (Eigen::Index k = 0; k < predictions.probs.cols(); ++k) {
            if (k) out << ',';
            out << format_double(predictions.probs(i, k));
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing predictions: " + path);
}

PredictionMatrix read_predictions(const std::string& path, std::size_t num_labels) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read predictions: " + path);
    PredictionMatrix result;
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(path + ": expected id<TAB>probabilities", lineno);
        const auto fields = split(std::string_view(line).substr(tab + 1), ',');
        if (fields.size() != num_labels)
            throw ShapeError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                             " probabilities, expected " + std::to_string(num_labels));
        for (auto f : fields) values.push_back(parse_double(f, path, lineno));
        result.ids.push_back(line.substr(0, tab));
    }
    result.probs = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(result.ids.size()),
                                      static_cast<Eigen::Index>(num_labels));
    result.validate();
    return result;
}

BinaryMatrix aligned_gold(const Corpus& corpus, std::span<const std::string> ids) {
    if (ids.size() != corpus.size())
        throw ShapeError(std::to_string(ids.size()) + " predictions for a corpus of " + std::to_string(corpus.size()));
    std::unordered_map<std::string_view, std::size_t> row;
    for (std::size_t i = 0; i < corpus.size(); ++i) row.emplace(corpus[i].id, i);
    BinaryMatrix gold = BinaryMatrix::Zero(static_cast<Eigen::Index>(ids.size()),
                                           static_cast<Eigen::Index>(corpus.vocab().size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = row.find(ids[i]);
        if (it == row.end()) throw ValidationError("prediction id not in corpus: " + ids[i]);
        for (int k : corpus[it->second].labels.indices()) gold(static_cast<Eigen::Index>(i), k) = 1;
    }
    return gold;
}

Thresholds::Thresholds(std::vector<double> values) : tau_(std::move(values)) {
    for (std::size_t k = 0; k < tau_.size(); ++k) {
        if (!(tau_[k] > 0.0 && tau_[k] < 1.0))
            throw ValidationError("threshold " + std::to_string(k) + " must lie in (0, 1)");
    }
}

Thresholds Thresholds::uniform(std::size_t num_labels, double tau) {
    return Thresholds(std::vector<double>(num_labels, tau));
}

void Thresholds::save(const std::string& path, const LabelVocabulary& vocab) const {
    if (vocab.size() != size()) throw ShapeError("thresholds and label vocabulary differ in size");
    std::ofstream out(path);
    if (!out) throw Error("cannot write thresholds: " + path);
    for (std::size_t k = 0; k < size(); ++k) out << vocab.name(k) << '\t' << format_double(tau_[k]) << '\n';
}

Thresholds Thresholds::load(const std::string& path, const LabelVocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read thresholds: " + path);
    std::vector<double> tau(vocab.size(), -1.0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(path + ": expected label<TAB>threshold", lineno);
        tau[vocab.index_of(line.substr(0, tab))] = parse_double(std::string_view(line).substr(tab + 1), path, lineno);
    }
    for (std::size_t k = 0; k < tau.size(); ++k) {
        if (tau[k] < 0.0) throw ValidationError(path + ": no threshold for " + vocab.name(k));
    }
    return Thresholds(std::move(tau));
}

BinaryMatrix binarize(const Matrix& probs, const Thresholds& thresholds) {
    if (static_cast<std::size_t>(probs.cols()) != thresholds.size())
        throw ShapeError(std::to_string(thresholds.size()) + " thresholds for " + std::to_string(probs.cols()) +
                         " labels");
    BinaryMatrix out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k)
            out(i, k) = probs(i, k) >= thresholds[static_cast<std::size_t>(k)] ? 1 : 0;
    }
    return out;
}

std::vector<LabelCounts> label_counts(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    check_shapes(pred, gold);
    std::vector<LabelCounts> counts(static_cast<std::size_t>(pred.cols()));
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        for (Eigen::Index k = 0; k < pred.cols(); ++k) {
            const bool p = pred(i, k) != 0;
            const bool g = gold(i, k) != 0;
            auto& c = counts[static_cast<std::size_t>(k)];
            c.tp += p && g;
            c.fp += p && !g;
            c.fn += !p && g;
        }
    }
    return counts;
}

double subset_accuracy(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    check_shapes(pred, gold);
    std::int64_t exact = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        bool same = true;
        for (Eigen::Index k = 0; k < pred.cols() && same; ++k) same = (pred(i, k) != 0) == (gold(i, k) != 0);
        exact += same;
    }
    return ratio(exact, pred.rows());
}

double hamming_loss(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    check_shapes(pred, gold);
    std::int64_t wrong = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        for (Eigen::Index k = 0; k < pred.cols(); ++k) wrong += (pred(i, k) != 0) != (gold(i, k) != 0);
    }
    return ratio(wrong, pred.size());
}

LabelPrf prf_from_counts(const LabelCounts& c) {
    return {ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn), ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
            c.support()};
}

std::vector<LabelPrf> per_label_prf(const BinaryMatrix& pred, const BinaryMatrix& gold) {
    std::vector<LabelPrf> out;
    for (const auto& c : label_counts(pred, gold)) out.push_back(prf_from_counts(c));
    return out;
}

double f1_from_rates(double precision, double recall) {
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

double macro_f1_from_counts(std::span<const LabelCounts> counts, std::span<const std::size_t> macro_exclude) {
    using boost::multiprecision::cpp_rational;
    const auto excluded = exclusion_mask(counts.size(), macro_exclude);
    cpp_rational total = 0;
    std::int64_t used = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (excluded[k]) continue;
        const auto [num, den] = f1_fraction(counts[k]);
        total += cpp_rational(num, den);
        ++used;
    }
    if (used == 0) return 0.0;
    total /= used;
    return total.convert_to<double>();
}

MicroMacro micro_macro(const BinaryMatrix& pred, const BinaryMatrix& gold, std::span<const std::size_t> macro_exclude) {
    const auto counts = label_counts(pred, gold);
    LabelCounts pooled;
    for (const auto& c : counts) {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
    }
    return {prf_from_counts(pooled).f1, macro_f1_from_counts(counts, macro_exclude)};
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
    return grid;
}

Thresholds tune_thresholds(const Matrix& probs, const BinaryMatrix& gold, std::span<const double> grid,
                           std::size_t workers) {
    if (grid.empty()) throw ValidationError("threshold grid is empty");
    if (probs.rows() != gold.rows() || probs.cols() != gold.cols())
        throw ShapeError("probabilities " + shape_string(probs) + " vs gold " + shape_string(gold));
    std::vector<double> sorted(grid.begin(), grid.end());
    for (double t : sorted) {
        if (!(t > 0.0 && t < 1.0)) throw ValidationError("grid value outside (0, 1): " + format_double(t));
    }
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    const auto K = static_cast<std::size_t>(probs.cols());
    std::vector<double> tau(K, sorted.front());
    auto tune_label = [&](std::size_t k) {
        const auto col = static_cast<Eigen::Index>(k);
        if (gold.col(col).cast<int>().sum() == 0) {
            // F1 is 0 everywhere; the smallest threshold would only flood
            // the label with false positives.
            tau[k] = *std::min_element(sorted.begin(), sorted.end(), [](double a, double b) {
                return std::abs(a - 0.5) < std::abs(b - 0.5);
            });
            return;
        }
        std::pair<std::int64_t, std::int64_t> best{-1, 1};
        for (double t : sorted) {
            LabelCounts c;
            for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                const bool p = probs(i, col) >= t;
                const bool g = gold(i, col) != 0;
                c.tp += p && g;
                c.fp += p && !g;
                c.fn += !p && g;
            }
            const auto f = f1_fraction(c);
            // Strictly greater, compared exactly, so ties keep the smaller threshold.
            if (f.first * best.second > best.first * f.second) {
                best = f;
                tau[k] = t;
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(K, 1));
    if (workers == 1) {
        for (std::size_t k = 0; k < K; ++k) tune_label(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < K; k = next++) tune_label(k);
            });
        }
    }
    return Thresholds(std::move(tau));
}

MetricsReport build_report(const BinaryMatrix& pred, const BinaryMatrix& gold, const LabelVocabulary& vocab,
                           std::span<const std::size_t> macro_exclude) {
    check_shapes(pred, gold);
    if (static_cast<std::size_t>(pred.cols()) != vocab.size())
        throw ShapeError(std::to_string(pred.cols()) + " prediction columns for " + std::to_string(vocab.size()) +
                         " labels");
    MetricsReport r;
    r.labels = vocab.names();
    const auto counts = label_counts(pred, gold);
    for (const auto& c : counts) r.per_label.push_back(prf_from_counts(c));
    const auto mm = micro_macro(pred, gold, macro_exclude);
    r.subset_accuracy = subset_accuracy(pred, gold);
    r.micro_f1 = mm.micro_f1;
    r.macro_f1 = mm.macro_f1;
    r.hamming_loss = hamming_loss(pred, gold);
    r.num_examples = static_cast<std::size_t>(pred.rows());
    const auto excluded = exclusion_mask(vocab.size(), macro_exclude);
    for (std::size_t k = 0; k < vocab.size(); ++k) {
        if (excluded[k]) r.macro_excluded.push_back(vocab.name(k));
    }
    return r;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "text") return ReportFormat::kText;
    if (name == "tsv") return ReportFormat::kTsv;
    if (name == "json") return ReportFormat::kJson;
    throw ValidationError("unknown report format '" + name + "' (expected text, tsv, or json)");
}

std::string render_aggregates(const MetricsReport& report) {
    std::ostringstream out;
    out << "subset_accuracy\tmicro_f1\tmacro_f1\thamming_loss\n";
    out << format_double(report.subset_accuracy) << '\t' << format_double(report.micro_f1) << '\t'
        << format_double(report.macro_f1) << '\t' << format_double(report.hamming_loss) << '\n';
    return out.str();
}

std::string render_report(const MetricsReport& report, ReportFormat format) {
    std::ostringstream out;
    switch (format) {
        case ReportFormat::kText: {
            std::size_t width = 5;
            for (const auto& l : report.labels) width = std::max(width, l.size());
            char buf[128];
            std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %7s\n", static_cast<int>(width), "label",
                          "precision", "recall", "f1", "support");
            out << buf;
            for (std::size_t k = 0; k < report.labels.size(); ++k) {
                const auto& p = report.per_label[k];
                std::snprintf(buf, sizeof buf, "%-*s  %9.3f  %9.3f  %9.3f  %7lld\n", static_cast<int>(width),
                              report.labels[k].c_str(), p.precision, p.recall, p.f1,
                              static_cast<long long>(p.support));
                out << buf;
            }
            out << '\n';
            std::snprintf(buf, sizeof buf,
                          "examples %zu\nsubset accuracy %.4f\nmicro F1 %.4f\nmacro F1 %.4f\nHamming loss %.4f\n",
                          report.num_examples, report.subset_accuracy, report.micro_f1, report.macro_f1,
                          report.hamming_loss);
            out << buf;
            if (!report.macro_excluded.empty()) {
                out << "macro F1 excludes:";
                for (const auto& l : report.macro_excluded) out << ' ' << l;
                out << '\n';
            }
            break;
        }
        case ReportFormat::kTsv: {
            out << "label\tprecision\trecall\tf1\tsupport\n";
            for (std::size_t k = 0; k < report.labels.size(); ++k) {
                const auto& p = report.per_label[k];
                out << report.labels[k] << '\t' << format_double(p.precision) << '\t' << format_double(p.recall)
                    << '\t' << format_double(p.f1) << '\t' << p.support << '\n';
            }
            out << "#aggregate\tnum_examples\t" << report.num_examples << '\n';
            out << "#aggregate\tsubset_accuracy\t" << format_double(report.subset_accuracy) << '\n';
            out << "#aggregate\tmicro_f1\t" << format_double(report.micro_f1) << '\n';
            out << "#aggregate\tmacro_f1\t" << format_double(report.macro_f1) << '\n';
            out << "#aggregate\thamming_loss\t" << format_double(report.hamming_loss) << '\n';
            for (const auto& l : report.macro_excluded) out << "#macro_excluded\t" << l << '\n';
            break;
        }
        case ReportFormat::kJson: {
            nlohmann::ordered_json j;
            j["num_examples"] = report.num_examples;
            j["aggregates"] = {{"subset_accuracy", report.subset_accuracy},
                               {"micro_f1", report.micro_f1},
                               {"macro_f1", report.macro_f1},
                               {"hamming_loss", report.hamming_loss}};
            j["macro_excluded"] = report.macro_excluded;
            auto labels = nlohmann::ordered_json::array();
            for (std::size_t k = 0; k < report.labels.size(); ++k) {
                const auto& p = report.per_label[k];
                labels.push_back({{"label", report.labels[k]},
                                  {"precision", p.precision},
                                  {"recall", p.recall},
                                  {"f1", p.f1},
                                  {"support", p.support}});
            }
            j["labels"] = std::move(labels);
            out << j.dump(2) << '\n';
            break;
        }
    }
    return out.str();
}

MetricsReport parse_report_tsv(const std::string& tsv) {
    MetricsReport r;
    std::istringstream in(tsv);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (!header) {
            if (line != "label\tprecision\trecall\tf1\tsupport") throw ParseError("report: missing header", lineno);
            header = true;
        } else if (f[0] == "#aggregate" && f.size() == 3) {
            if (f[1] == "num_examples") {
                std::size_t n = 0;
                const auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), n);
                if (ec != std::errc{} || p != f[2].data() + f[2].size()) throw ParseError("report: bad count", lineno);
                r.num_examples = n;
                continue;
            }
            const double v = parse_double(f[2], "report", lineno);
            if (f[1] == "subset_accuracy") r.subset_accuracy = v;
            else if (f[1] == "micro_f1") r.micro_f1 = v;
            else if (f[1] == "macro_f1") r.macro_f1 = v;
            else if (f[1] == "hamming_loss") r.hamming_loss = v;
            else throw ParseError("report: unknown aggregate " + std::string(f[1]), lineno);
        } else if (f[0] == "#macro_excluded" && f.size() == 2) {
            r.macro_excluded.emplace_back(f[1]);
        } else if (f.size() == 5) {
            LabelPrf p;
            p.precision = parse_double(f[1], "report", lineno);
            p.recall = parse_double(f[2], "report", lineno);
            p.f1 = parse_double(f[3], "report", lineno);
            const auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), p.support);
            if (ec != std::errc{} || ptr != f[4].data() + f[4].size()) throw ParseError("report: bad support", lineno);
            r.labels.emplace_back(f[0]);
            r.per_label.push_back(p);
        } else {
            throw ParseError("report: unexpected row", lineno);
        }
    }
    if (!header) throw ParseError("report: empty input");
    return r;
}

}  // namespace goemo
