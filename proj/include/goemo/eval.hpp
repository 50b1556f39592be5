#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "goemo/corpus.hpp"
#include "goemo/dense.hpp"

namespace goemo {

/// Probabilities for N examples, aligned with their ids.
struct PredictionMatrix {
    std::vector<std::string> ids;
    Matrix probs;  // N x K, entries in [0, 1]

    /// Throws on a size mismatch, duplicate ids, or entries outside [0, 1].
    void validate() const;
};

/// `id<TAB>p_1,...,p_K` per line, probabilities printed with %.17g.
void write_predictions(const std::string& path, const PredictionMatrix& predictions);
PredictionMatrix read_predictions(const std::string& path, std::size_t num_labels = kNumLabels);

/// Gold labels of `corpus` reordered to match `ids`. Throws ShapeError when
/// the id sets differ in size and ValidationError when an id is unknown.
BinaryMatrix aligned_gold(const Corpus& corpus, std::span<const std::string> ids);

/// Per-label decision thresholds, each in (0, 1).
class Thresholds {
   public:
    explicit Thresholds(std::vector<double> values);
    static Thresholds uniform(std::size_t num_labels, double tau = 0.5);

    std::size_t size() const noexcept { return tau_.size(); }
    double operator[](std::size_t k) const { return tau_[k]; }
    const std::vector<double>& values() const noexcept { return tau_; }

    /// `label_name<TAB>threshold` lines in label order.
    void save(const std::string& path, const LabelVocabulary& vocab) const;
    static Thresholds load(const std::string& path, const LabelVocabulary& vocab);

   private:
    std::vector<double> tau_;
};

/// 1 where prob >= tau_k. Rows may be all zero.
BinaryMatrix binarize(const Matrix& probs, const Thresholds& thresholds);

struct LabelCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t support() const noexcept { return tp + fn; }
};

std::vector<LabelCounts> label_counts(const BinaryMatrix& pred, const BinaryMatrix& gold);

// Every rate below is one division of exact integer counts, so results are
// correctly rounded. A zero denominator yields 0.

double subset_accuracy(const BinaryMatrix& pred, const BinaryMatrix& gold);
/// Mismatched cells over N*K.
double hamming_loss(const BinaryMatrix& pred, const BinaryMatrix& gold);

struct LabelPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;

    friend bool operator==(const LabelPrf&, const LabelPrf&) = default;
};

LabelPrf prf_from_counts(const LabelCounts& counts);
std::vector<LabelPrf> per_label_prf(const BinaryMatrix& pred, const BinaryMatrix& gold);

/// Harmonic mean of a reported precision and recall, for checking
/// published rows where only the rates are known.
double f1_from_rates(double precision, double recall);

struct MicroMacro {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
};

/// Micro F1 from pooled counts. Macro F1 is the unweighted mean of
/// per-label F1 over all labels not in `macro_exclude`, summed exactly
/// and rounded once.
MicroMacro micro_macro(const BinaryMatrix& pred, const BinaryMatrix& gold,
                       std::span<const std::size_t> macro_exclude = {});

/// Exact mean of 2tp/(2tp+fp+fn) over the chosen labels, rounded to nearest.
double macro_f1_from_counts(std::span<const LabelCounts> counts, std::span<const std::size_t> macro_exclude = {});

/// {0.05, 0.10, ..., 0.95}.
std::vector<double> default_threshold_grid();

/// Per label, the grid value maximizing validation F1; ties go to the
/// smallest threshold. A label with no validation positives gets the grid
/// value nearest 0.5 instead. `workers` > 1 searches labels concurrently.
Thresholds tune_thresholds(const Matrix& probs, const BinaryMatrix& gold, std::span<const double> grid,
                           std::size_t workers = 1);

struct MetricsReport {
    std::vector<std::string> labels;
    std::vector<LabelPrf> per_label;
    double subset_accuracy = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double hamming_loss = 0.0;
    std::size_t num_examples = 0;
    /// Labels left out of the macro average.
    std::vector<std::string> macro_excluded;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport build_report(const BinaryMatrix& pred, const BinaryMatrix& gold, const LabelVocabulary& vocab,
                           std::span<const std::size_t> macro_exclude = {});

enum class ReportFormat { kText, kTsv, kJson };

ReportFormat parse_report_format(const std::string& name);

/// Text: aligned table. TSV: `label precision recall f1 support` rows then
/// `#aggregate` rows, numbers in %.17g so parse_report_tsv is exact.
/// JSON: one object with `labels` and `aggregates`.
std::string render_report(const MetricsReport& report, ReportFormat format);
MetricsReport parse_report_tsv(const std::string& tsv);

/// Aggregates in the order subset accuracy, micro F1, macro F1, Hamming
/// loss, tab-separated with a header line.
std::string render_aggregates(const MetricsReport& report);

}  // namespace goemo
