#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "goemo/dense.hpp"

namespace goemo {

/// Number of labels in the GoEmotions taxonomy: 27 emotions plus neutral.
inline constexpr std::size_t kNumLabels = 28;

/// Ordered label names; position is the label index used in data files.
class LabelVocabulary {
   public:
    explicit LabelVocabulary(std::vector<std::string> names);

    /// The GoEmotions release order (admiration = 0, ..., neutral = 27).
    static LabelVocabulary goemotions();
    /// One label name per line; line order defines the index.
    static LabelVocabulary load(const std::string& path);

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    /// Throws ValidationError for an unknown name.
    std::size_t index_of(std::string_view name) const;

   private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Sorted, duplicate-free set of label indices.
class LabelSet {
   public:
    LabelSet() = default;
    /// Sorts and validates; throws ValidationError on duplicates or indices
    /// outside [0, num_labels).
    LabelSet(std::vector<int> indices, std::size_t num_labels = kNumLabels);

    const std::vector<int>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(int label) const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;

   private:
    std::vector<int> indices_;
};

struct Example {
    std::string id;
    std::string text;
    LabelSet labels;
    std::size_t char_length = 0;  // Unicode scalar values
    std::size_t word_count = 0;   // whitespace-separated words
    double avg_word_length = 0.0;

    /// Fills the derived length fields from `text`.
    static Example make(std::string id, std::string text, LabelSet labels);
};

/// N x num_labels indicator matrix of `labels`.
BinaryMatrix label_matrix(std::span<const LabelSet> labels, std::size_t num_labels = kNumLabels);

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

class Corpus {
   public:
    Corpus(std::vector<Example> examples, Split split, LabelVocabulary vocab);

    const std::vector<Example>& examples() const noexcept { return examples_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }
    const Example& operator[](std::size_t i) const { return examples_[i]; }
    Split split() const noexcept { return split_; }
    const LabelVocabulary& vocab() const noexcept { return vocab_; }

    /// N x K indicator matrix of the gold labels.
    BinaryMatrix label_matrix() const;

    /// Concatenates corpora that share a label vocabulary. Ids need not be
    /// unique across the inputs.
    static Corpus combine(const std::vector<const Corpus*>& parts);

    /// Writes the three-field TSV format read by load_corpus.
    void write_tsv(std::ostream& out) const;

   private:
    std::vector<Example> examples_;
    Split split_;
    LabelVocabulary vocab_;
};

/// Reads `text<TAB>labels<TAB>id` rows. A header line is skipped when its
/// label field contains no digits. Examples carrying more than five labels
/// are accepted with a warning.
Corpus load_corpus(const std::string& path, const LabelVocabulary& vocab, std::string_view split_name);
Corpus read_corpus(std::istream& in, const LabelVocabulary& vocab, Split split,
                   const std::string& source_name = "<stream>");

struct LabelCountBin {
    std::size_t count = 0;
    double percentage = 0.0;
};

struct CorpusStats {
    std::size_t total = 0;
    std::vector<std::size_t> per_label_counts;
    std::map<std::size_t, LabelCountBin> label_count_histogram;  // labels per example -> bin
    double mean_char_length = 0.0;
    double mean_word_count = 0.0;
    double median_word_count = 0.0;
    std::pair<std::size_t, std::size_t> char_length_range{0, 0};
};

CorpusStats compute_stats(const Corpus& corpus);

/// The k most frequent tokens among examples carrying `label`, ordered by
/// decreasing frequency with ties broken in byte order.
std::vector<std::pair<std::string, std::size_t>> top_tokens_per_label(const Corpus& corpus, std::size_t label,
                                                                       std::size_t k);

/// Flat `key value` lines.
std::string render_stats_text(const CorpusStats& stats, const LabelVocabulary& vocab);
/// Single JSON object; see README for the schema.
std::string render_stats_json(const CorpusStats& stats, const LabelVocabulary& vocab);

}  // namespace goemo
