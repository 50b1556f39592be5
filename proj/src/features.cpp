#include "goemo/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "goemo/corpus.hpp"
#include "goemo/error.hpp"

namespace goemo {

namespace {

bool parse_double(std::string_view s, double& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string SparseVector::serialize() const {
    std::string out;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (j) out.push_back(' ');
        out += std::to_string(indices[j]);
        out.push_back(':');
        out += format_double(values[j]);
    }
    return out;
}

SparseVector SparseVector::parse(const std::string& line, std::size_t dimension) {
    SparseVector v;
    v.dimension = dimension;
    for (auto pair : text::split_whitespace(line)) {
        const auto colon = pair.find(':');
        if (colon == std::string_view::npos) throw ParseError("sparse entry without ':' : " + std::string(pair));
        int index = 0;
        const auto key = pair.substr(0, colon);
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
        double value = 0.0;
        if (ec != std::errc{} || ptr != key.data() + key.size() || !parse_double(pair.substr(colon + 1), value))
            throw ParseError("malformed sparse entry: " + std::string(pair));
        if (index < 0 || static_cast<std::size_t>(index) >= dimension)
            throw ShapeError("sparse index " + std::to_string(index) + " outside dimension " + std::to_string(dimension));
        if (!v.indices.empty() && index <= v.indices.back())
            throw ParseError("sparse indices must be strictly increasing");
        v.indices.push_back(index);
        v.values.push_back(value);
    }
    return v;
}

SparseMatrix stack_rows(std::span<const SparseVector> rows, std::size_t dimension) {
    std::vector<Eigen::Triplet<double>> triplets;
    std::size_t nnz = 0;
    for (const auto& r : rows) nnz += r.nnz();
    triplets.reserve(nnz);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].dimension != dimension)
            throw ShapeError("feature dimension " + std::to_string(rows[i].dimension) + " != " +
                             std::to_string(dimension));
        for (std::size_t j = 0; j < rows[i].nnz(); ++j)
            triplets.emplace_back(static_cast<int>(i), rows[i].indices[j], rows[i].values[j]);
    }
    SparseMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dimension));
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

std::vector<std::string> extract_ngrams(const text::TokenSequence& doc, bool bigrams) {
    std::vector<std::string> out(doc.begin(), doc.end());
    if (bigrams) {
        for (std::size_t i = 0; i + 1 < doc.size(); ++i) out.push_back(doc[i] + " " + doc[i + 1]);
    }
    return out;
}

TfidfModel TfidfModel::fit(std::span<const text::TokenSequence> train_docs, const TfidfConfig& config) {
    if (config.min_df < 1) throw ValidationError("min_df must be >= 1");
    const bool any_tokens =
        std::any_of(train_docs.begin(), train_docs.end(), [](const auto& d) { return !d.empty(); });
    if (!any_tokens) throw ValidationError("cannot fit TF-IDF on an empty corpus");

    std::unordered_map<std::string, std::size_t> df;
    for (const auto& doc : train_docs) {
        auto grams = extract_ngrams(doc, config.bigrams);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        for (auto& g : grams) ++df[std::move(g)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [gram, n] : df) {
        if (n >= config.min_df) ranked.emplace_back(gram, n);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > config.max_features) ranked.resize(config.max_features);

    TfidfModel model;
    model.config_ = config;
    model.num_documents_ = train_docs.size();
    for (auto& [gram, n] : ranked) {
        model.ngrams_.push_back(gram);
        model.df_.push_back(n);
    }
    model.rebuild_index();
    return model;
}

void TfidfModel::rebuild_index() {
    column_.clear();
    idf_.resize(static_cast<Eigen::Index>(ngrams_.size()));
    const double numerator = 1.0 + static_cast<double>(num_documents_);
    for (std::size_t c = 0; c < ngrams_.size(); ++c) {
        column_.emplace(ngrams_[c], c);
        idf_(static_cast<Eigen::Index>(c)) = std::log(numerator / static_cast<double>(df_[c]));
    }
}

std::optional<std::size_t> TfidfModel::column(const std::string& ngram) const {
    auto it = column_.find(ngram);
    if (it == column_.end()) return std::nullopt;
    return it->second;
}

SparseVector TfidfModel::transform(const text::TokenSequence& doc) const {
    std::map<int, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& g : extract_ngrams(doc, config_.bigrams)) {
        auto it = column_.find(g);
        if (it == column_.end()) continue;
        ++counts[static_cast<int>(it->second)];
        ++total;
    }
    SparseVector v;
    v.dimension = dimension();
    v.indices.reserve(counts.size());
    v.values.reserve(counts.size());
    for (const auto& [col, n] : counts) {
        v.indices.push_back(col);
        v.values.push_back(static_cast<double>(n) / static_cast<double>(total) * idf_(col));
    }
    if (config_.l2_normalize && !v.empty()) {
        double norm = 0.0;
        for (double x : v.values) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v.values) x /= norm;
    }
    return v;
}

void TfidfModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write TF-IDF model: " + path);
    out << "tfidf " << num_documents_ << ' ' << ngrams_.size() << ' ' << config_.min_df << ' '
        << config_.max_features << ' ' << (config_.bigrams ? 1 : 0) << ' ' << (config_.l2_normalize ? 1 : 0)
        << '\n';
    for (std::size_t c = 0; c < ngrams_.size(); ++c) out << ngrams_[c] << '\t' << df_[c] << '\n';
}

TfidfModel TfidfModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read TF-IDF model: " + path);
    TfidfModel model;
    std::string tag;
    std::size_t dim = 0;
    int bigrams = 1;
    int l2 = 0;
    if (!(in >> tag >> model.num_documents_ >> dim >> model.config_.min_df >> model.config_.max_features >> bigrams >>
          l2) ||
        tag != "tfidf")
        throw ParseError(path + ": bad TF-IDF header", 1);
    model.config_.bigrams = bigrams != 0;
    model.config_.l2_normalize = l2 != 0;
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw ParseError(path + ": expected ngram<TAB>df", lineno);
        std::size_t n = 0;
        const auto count = std::string_view(line).substr(tab + 1);
        const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), n);
        if (ec != std::errc{} || ptr != count.data() + count.size() || n == 0)
            throw ParseError(path + ": bad document frequency", lineno);
        model.ngrams_.push_back(line.substr(0, tab));
        model.df_.push_back(n);
    }
    if (model.ngrams_.size() != dim) throw ParseError(path + ": header dimension disagrees with row count");
    model.rebuild_index();
    return model;
}

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

bool EmbeddingTable::add(const std::string& token, const Eigen::Ref<const Vector>& vector) {
    if (static_cast<std::size_t>(vector.size()) != dimension_)
        throw ShapeError("embedding for '" + token + "' has dimension " + std::to_string(vector.size()) +
                         ", expected " + std::to_string(dimension_));
    if (!vector.allFinite()) throw ValidationError("embedding for '" + token + "' is not finite");
    if (index_.contains(token)) return false;
    index_.emplace(token, static_cast<Eigen::Index>(tokens_.size()));
    tokens_.push_back(token);
    data_.insert(data_.end(), vector.data(), vector.data() + vector.size());
    return true;
}

std::optional<Eigen::Index> EmbeddingTable::row_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EmbeddingTable EmbeddingTable::load(const std::string& path, std::size_t expected_dim,
                                    const std::unordered_set<std::string>* keep) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding file: " + path);
    EmbeddingTable table(expected_dim);
    Vector row(static_cast<Eigen::Index>(expected_dim));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = text::split_whitespace(line);
        if (parts.size() != expected_dim + 1)
            throw ParseError(path + ": expected " + std::to_string(expected_dim) + " components, got " +
                                 std::to_string(parts.size() - 1),
                             lineno);
        for (std::size_t j = 0; j < expected_dim; ++j) {
            if (!parse_double(parts[j + 1], row(static_cast<Eigen::Index>(j))))
                throw ParseError(path + ": non-numeric component '" + std::string(parts[j + 1]) + "'", lineno);
        }
        std::string token(parts[0]);
        if (keep && !keep->contains(token)) continue;
        table.add(token, row);
    }
    return table;
}

PooledVector mean_pool(const EmbeddingTable& table, const text::TokenSequence& doc) {
    PooledVector out;
    out.value = Vector::Zero(static_cast<Eigen::Index>(table.dimension()));
    for (const auto& tok : doc) {
        if (auto row = table.row_of(tok)) {
            out.value += table.vectors().row(*row).transpose();
            ++out.in_table;
        }
    }
    if (out.in_table == 0) {
        out.degenerate = true;
    } else {
        out.value /= static_cast<double>(out.in_table);
    }
    return out;
}

EmbeddedSequence embed_sequence(const EmbeddingTable& table, const text::TokenSequence& doc, std::size_t max_len) {
    if (max_len == 0) throw ValidationError("max_len must be >= 1");
    EmbeddedSequence seq;
    seq.length = std::min(doc.size(), max_len);
    seq.rows = Matrix::Zero(static_cast<Eigen::Index>(seq.length), static_cast<Eigen::Index>(table.dimension()));
    for (std::size_t t = 0; t < seq.length; ++t) {
        if (auto row = table.row_of(doc[t])) seq.rows.row(static_cast<Eigen::Index>(t)) = table.vectors().row(*row);
    }
    return seq;
}

Matrix load_summary_vectors(const std::string& path, const Corpus& corpus, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open summary-vector file: " + path);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < corpus.size(); ++i) position.emplace(corpus[i].id, i);

    std::size_t dim = expected_dim;
    Matrix out;
    std::vector<bool> filled(corpus.size(), false);
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = text::split_whitespace(line);
        if (dim == 0) dim = parts.size() - 1;
        if (dim == 0 || parts.size() != dim + 1)
            throw ParseError(path + ": expected id plus " + std::to_string(dim) + " values", lineno);
        if (out.size() == 0) out = Matrix::Zero(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(dim));
        std::string id(parts[0]);
        if (!seen.insert(id).second) throw ValidationError(path + ": duplicate id '" + id + "' (line " + std::to_string(lineno) + ")");
        auto it = position.find(id);
        if (it == position.end()) continue;
        const auto r = static_cast<Eigen::Index>(it->second);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!parse_double(parts[j + 1], out(r, static_cast<Eigen::Index>(j))))
                throw ParseError(path + ": non-numeric value '" + std::string(parts[j + 1]) + "'", lineno);
        }
        filled[it->second] = true;
    }
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!filled[i]) missing.push_back(corpus[i].id);
    }
    if (!missing.empty()) {
        std::string msg = path + ": " + std::to_string(missing.size()) + " corpus ids have no vector:";
        for (std::size_t j = 0; j < std::min<std::size_t>(missing.size(), 20); ++j) msg += " " + missing[j];
        if (missing.size() > 20) msg += " ...";
        throw ValidationError(msg);
    }
    if (out.size() == 0) out = Matrix::Zero(0, static_cast<Eigen::Index>(dim));
    return out;
}

}  // namespace goemo
