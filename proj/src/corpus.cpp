#include "goemo/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "goemo/error.hpp"
#include "goemo/textprep.hpp"

namespace goemo {

namespace {

// Larger label sets than this never occur in the public release.
constexpr std::size_t kMaxObservedLabels = 5;

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

bool has_digit(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

LabelSet parse_labels(std::string_view field, std::size_t num_labels, std::size_t lineno) {
    if (field.empty()) throw ValidationError("empty label field (line " + std::to_string(lineno) + ")");
    std::vector<int> indices;
    std::size_t start = 0;
    while (start <= field.size()) {
        auto pos = field.find(',', start);
        if (pos == std::string_view::npos) pos = field.size();
        const auto piece = field.substr(start, pos - start);
        int value = 0;
        const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
        if (piece.empty() || ec != std::errc{} || ptr != piece.data() + piece.size())
            throw ParseError("label '" + std::string(piece) + "' is not an integer", lineno);
        if (value < 0 || static_cast<std::size_t>(value) >= num_labels)
            throw ValidationError("label index " + std::to_string(value) + " outside [0, " +
                                  std::to_string(num_labels) + ") (line " + std::to_string(lineno) + ")");
        indices.push_back(value);
        start = pos + 1;
    }
    try {
        return LabelSet(std::move(indices), num_labels);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
}

}  // namespace

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() != kNumLabels)
        throw ValidationError("label vocabulary must have " + std::to_string(kNumLabels) + " entries, got " +
                              std::to_string(names_.size()));
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) throw ValidationError("empty label name at index " + std::to_string(i));
        if (!index_.emplace(names_[i], i).second) throw ValidationError("duplicate label name " + names_[i]);
    }
}

LabelVocabulary LabelVocabulary::goemotions() {
    return LabelVocabulary({"admiration", "amusement", "anger",       "annoyance",  "approval",   "caring",
                            "confusion",  "curiosity", "desire",      "disappointment", "disapproval", "disgust",
                            "embarrassment", "excitement", "fear",    "gratitude",  "grief",      "joy",
                            "love",       "nervousness", "optimism",  "pride",      "realization", "relief",
                            "remorse",    "sadness",   "surprise",    "neutral"});
}

LabelVocabulary LabelVocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read label vocabulary: " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        names.push_back(line);
    }
    return LabelVocabulary(std::move(names));
}

std::size_t LabelVocabulary::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError("unknown label name: " + std::string(name));
    return it->second;
}

LabelSet::LabelSet(std::vector<int> indices, std::size_t num_labels) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
        throw ValidationError("duplicate label index in label set");
    for (int k : indices_) {
        if (k < 0 || static_cast<std::size_t>(k) >= num_labels)
            throw ValidationError("label index " + std::to_string(k) + " out of range");
    }
}

bool LabelSet::contains(int label) const { return std::binary_search(indices_.begin(), indices_.end(), label); }

Example Example::make(std::string id, std::string text, LabelSet labels) {
    Example ex;
    ex.char_length = text::utf8_length(text);
    const auto words = text::split_whitespace(text);
    ex.word_count = words.size();
    if (!words.empty()) {
        std::size_t chars = 0;
        for (auto w : words) chars += text::utf8_length(w);
        ex.avg_word_length = static_cast<double>(chars) / static_cast<double>(words.size());
    }
    ex.id = std::move(id);
    ex.text = std::move(text);
    ex.labels = std::move(labels);
    return ex;
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::kTrain:
            return "train";
        case Split::kValidation:
            return "validation";
        case Split::kTest:
            return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::kTrain;
    if (name == "validation" || name == "dev" || name == "val") return Split::kValidation;
    if (name == "test") return Split::kTest;
    throw ValidationError("unknown split name: " + std::string(name));
}

Corpus::Corpus(std::vector<Example> examples, Split split, LabelVocabulary vocab)
    : examples_(std::move(examples)), split_(split), vocab_(std::move(vocab)) {
    std::unordered_set<std::string_view> ids;
    for (const auto& ex : examples_) {
        if (!ids.insert(ex.id).second)
            throw ValidationError("duplicate id '" + ex.id + "' within split " + std::string(to_string(split_)));
        for (int k : ex.labels.indices()) {
            if (static_cast<std::size_t>(k) >= vocab_.size())
                throw ValidationError("label " + std::to_string(k) + " invalid for vocabulary");
        }
    }
}

BinaryMatrix label_matrix(std::span<const LabelSet> labels, std::size_t num_labels) {
    BinaryMatrix y = BinaryMatrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(num_labels));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (int k : labels[i].indices()) {
            if (static_cast<std::size_t>(k) >= num_labels)
                throw ShapeError("label " + std::to_string(k) + " outside " + std::to_string(num_labels) + " labels");
            y(static_cast<Eigen::Index>(i), k) = 1;
        }
    }
    return y;
}

BinaryMatrix Corpus::label_matrix() const {
    BinaryMatrix y = BinaryMatrix::Zero(static_cast<Eigen::Index>(examples_.size()),
                                        static_cast<Eigen::Index>(vocab_.size()));
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        for (int k : examples_[i].labels.indices()) y(static_cast<Eigen::Index>(i), k) = 1;
    }
    return y;
}

Corpus Corpus::combine(const std::vector<const Corpus*>& parts) {
    if (parts.empty()) throw ValidationError("nothing to combine");
    // Ids may repeat across splits, so combined ids carry a split prefix.
    std::vector<Example> all;
    for (const Corpus* part : parts) {
        if (part->vocab().names() != parts.front()->vocab().names())
            throw ValidationError("cannot combine corpora with different label vocabularies");
        for (const auto& ex : part->examples()) {
            Example copy = ex;
            copy.id = std::string(to_string(part->split())) + ":" + ex.id;
            all.push_back(std::move(copy));
        }
    }
    std::unordered_set<std::string> seen;
    for (auto& ex : all) {
        // Same split listed twice: disambiguate rather than reject.
        std::string id = ex.id;
        for (int n = 1; !seen.insert(id).second; ++n) id = ex.id + "#" + std::to_string(n);
        ex.id = std::move(id);
    }
    return Corpus(std::move(all), parts.front()->split(), parts.front()->vocab());
}

void Corpus::write_tsv(std::ostream& out) const {
    for (const auto& ex : examples_) {
        out << ex.text << '\t';
        for (std::size_t j = 0; j < ex.labels.size(); ++j) {
            if (j) out << ',';
            out << ex.labels.indices()[j];
        }
        out << '\t' << ex.id << '\n';
    }
}

Corpus read_corpus(std::istream& in, const LabelVocabulary& vocab, Split split, const std::string& source_name) {
    std::vector<Example> examples;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    bool first_row = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(source_name + ": expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                             lineno);
        if (std::exchange(first_row, false) && !fields[1].empty() && !has_digit(fields[1])) continue;  // header
        LabelSet labels = parse_labels(fields[1], vocab.size(), lineno);
        if (labels.size() > kMaxObservedLabels)
            log_warning(source_name + ":" + std::to_string(lineno) + ": example carries " +
                        std::to_string(labels.size()) + " labels");
        std::string id(fields[2]);
        if (!ids.insert(id).second)
            throw ValidationError(source_name + ": duplicate id '" + id + "' (line " + std::to_string(lineno) + ")");
        examples.push_back(Example::make(std::move(id), std::string(fields[0]), std::move(labels)));
    }
    return Corpus(std::move(examples), split, vocab);
}

Corpus load_corpus(const std::string& path, const LabelVocabulary& vocab, std::string_view split_name) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    return read_corpus(in, vocab, parse_split(split_name), path);
}

CorpusStats compute_stats(const Corpus& corpus) {
    if (corpus.empty()) throw ValidationError("cannot compute statistics of an empty corpus");
    CorpusStats s;
    s.total = corpus.size();
    s.per_label_counts.assign(corpus.vocab().size(), 0);
    std::vector<std::size_t> words;
    words.reserve(corpus.size());
    double chars = 0.0;
    s.char_length_range = {corpus[0].char_length, corpus[0].char_length};
    for (const auto& ex : corpus.examples()) {
        for (int k : ex.labels.indices()) ++s.per_label_counts[static_cast<std::size_t>(k)];
        ++s.label_count_histogram[ex.labels.size()].count;
        chars += static_cast<double>(ex.char_length);
        words.push_back(ex.word_count);
        s.char_length_range.first = std::min(s.char_length_range.first, ex.char_length);
        s.char_length_range.second = std::max(s.char_length_range.second, ex.char_length);
    }
    for (auto& [n, bin] : s.label_count_histogram)
        bin.percentage = 100.0 * static_cast<double>(bin.count) / static_cast<double>(s.total);
    const auto n = static_cast<double>(s.total);
    s.mean_char_length = chars / n;
    double word_sum = 0.0;
    for (auto w : words) word_sum += static_cast<double>(w);
    s.mean_word_count = word_sum / n;
    std::sort(words.begin(), words.end());
    const std::size_t mid = words.size() / 2;
    s.median_word_count = words.size() % 2 == 1
                              ? static_cast<double>(words[mid])
                              : 0.5 * (static_cast<double>(words[mid - 1]) + static_cast<double>(words[mid]));
    return s;
}

std::vector<std::pair<std::string, std::size_t>> top_tokens_per_label(const Corpus& corpus, std::size_t label,
                                                                       std::size_t k) {
    if (label >= corpus.vocab().size()) throw ValidationError("label index " + std::to_string(label) + " out of range");
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& ex : corpus.examples()) {
        if (!ex.labels.contains(static_cast<int>(label))) continue;
        for (auto& tok : text::preprocess(ex.text)) ++freq[std::move(tok)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

std::string render_stats_text(const CorpusStats& stats, const LabelVocabulary& vocab) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "total " << stats.total << '\n';
    os << "mean_char_length " << stats.mean_char_length << '\n';
    os << "mean_word_count " << stats.mean_word_count << '\n';
    os << "median_word_count " << stats.median_word_count << '\n';
    os << "char_length_min " << stats.char_length_range.first << '\n';
    os << "char_length_max " << stats.char_length_range.second << '\n';
    for (const auto& [n, bin] : stats.label_count_histogram) {
        os << "labels_per_example." << n << ".count " << bin.count << '\n';
        os << "labels_per_example." << n << ".percentage " << bin.percentage << '\n';
    }
    for (std::size_t c = 0; c < stats.per_label_counts.size(); ++c)
        os << "label_count." << vocab.name(c) << ' ' << stats.per_label_counts[c] << '\n';
    return os.str();
}

std::string render_stats_json(const CorpusStats& stats, const LabelVocabulary& vocab) {
    nlohmann::ordered_json j;
    j["total"] = stats.total;
    j["mean_char_length"] = stats.mean_char_length;
    j["mean_word_count"] = stats.mean_word_count;
    j["median_word_count"] = stats.median_word_count;
    j["char_length_min"] = stats.char_length_range.first;
    j["char_length_max"] = stats.char_length_range.second;
    auto& hist = j["label_count_histogram"];
    hist = nlohmann::ordered_json::object();
    for (const auto& [n, bin] : stats.label_count_histogram)
        hist[std::to_string(n)] = {{"count", bin.count}, {"percentage", bin.percentage}};
    auto& per = j["per_label_counts"];
    per = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < stats.per_label_counts.size(); ++c) per[vocab.name(c)] = stats.per_label_counts[c];
    return j.dump(2) + "\n";
}

}  // namespace goemo
