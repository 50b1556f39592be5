#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "goemo/dense.hpp"
#include "goemo/textprep.hpp"

namespace goemo {

class Corpus;

/// Sorted (index, value) pairs over a fixed dimension.
struct SparseVector {
    std::vector<int> indices;
    std::vector<double> values;
    std::size_t dimension = 0;

    std::size_t nnz() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }

    /// Space-separated `index:value` pairs.
    std::string serialize() const;
    static SparseVector parse(const std::string& line, std::size_t dimension);

    friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Rows of `rows` stacked into a CSR matrix with `dimension` columns.
SparseMatrix stack_rows(std::span<const SparseVector> rows, std::size_t dimension);

struct TfidfConfig {
    std::size_t min_df = 2;
    std::size_t max_features = 50000;
    bool bigrams = true;
    /// Scale each transformed vector to unit L2 norm.
    bool l2_normalize = false;
};

/// Unigrams followed by adjacent-pair bigrams (tokens joined by one space).
std::vector<std::string> extract_ngrams(const text::TokenSequence& doc, bool bigrams);

/// Term frequency / inverse document frequency over unigrams and bigrams.
///
/// idf(t) = log((1 + |D|) / df(t)); df(t) >= 1 for every column, so no
/// smoothing term is needed in the denominator. Term frequency is the
/// n-gram count divided by the count of all in-model n-gram occurrences
/// of the document.
class TfidfModel {
   public:
    TfidfModel() = default;

    static TfidfModel fit(std::span<const text::TokenSequence> train_docs, const TfidfConfig& config = {});

    SparseVector transform(const text::TokenSequence& doc) const;

    std::size_t dimension() const noexcept { return ngrams_.size(); }
    std::size_t num_documents() const noexcept { return num_documents_; }
    const std::vector<std::string>& ngrams() const noexcept { return ngrams_; }
    const Vector& idf() const noexcept { return idf_; }
    std::size_t document_frequency(std::size_t column) const { return df_.at(column); }
    std::optional<std::size_t> column(const std::string& ngram) const;
    const TfidfConfig& config() const noexcept { return config_; }

    void save(const std::string& path) const;
    static TfidfModel load(const std::string& path);

   private:
    void rebuild_index();

    TfidfConfig config_;
    std::size_t num_documents_ = 0;
    std::vector<std::string> ngrams_;
    std::vector<std::size_t> df_;
    Vector idf_;
    std::unordered_map<std::string, std::size_t> column_;
};

inline TfidfModel fit_tfidf(std::span<const text::TokenSequence> train_docs, const TfidfConfig& config = {}) {
    return TfidfModel::fit(train_docs, config);
}
inline SparseVector transform_tfidf(const TfidfModel& model, const text::TokenSequence& doc) {
    return model.transform(doc);
}

/// Frozen pretrained word vectors.
class EmbeddingTable {
   public:
    explicit EmbeddingTable(std::size_t dimension);

    /// GloVe text format: `token v1 ... vd` per line. When `keep` is given
    /// only those tokens are stored, though every row is still validated.
    static EmbeddingTable load(const std::string& path, std::size_t expected_dim,
                               const std::unordered_set<std::string>* keep = nullptr);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return tokens_.size(); }
    bool contains(const std::string& token) const { return index_.contains(token); }
    /// Row of the token in `vectors()`, if present.
    std::optional<Eigen::Index> row_of(const std::string& token) const;
    Eigen::Map<const Matrix> vectors() const {
        return {data_.data(), static_cast<Eigen::Index>(tokens_.size()), static_cast<Eigen::Index>(dimension_)};
    }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// Returns false (and ignores the row) when the token already exists.
    bool add(const std::string& token, const Eigen::Ref<const Vector>& vector);

   private:
    std::size_t dimension_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, Eigen::Index> index_;
    std::vector<double> data_;  // row-major, size() x dimension()
};

struct PooledVector {
    Vector value;
    std::size_t in_table = 0;
    /// No token of the document was in the table; value is all zeros.
    bool degenerate = false;
};

/// Mean of the vectors of in-table tokens.
PooledVector mean_pool(const EmbeddingTable& table, const text::TokenSequence& doc);

struct EmbeddedSequence {
    Matrix rows;  // length x d; out-of-table tokens are zero rows
    std::size_t length = 0;
};

/// Embeds the first max_len tokens of `doc`.
EmbeddedSequence embed_sequence(const EmbeddingTable& table, const text::TokenSequence& doc, std::size_t max_len);

/// Reads `id v1 ... vd` rows and returns them in corpus order. With
/// expected_dim == 0 the dimension is taken from the first row.
Matrix load_summary_vectors(const std::string& path, const Corpus& corpus, std::size_t expected_dim = 768);

}  // namespace goemo
