#pragma once

// Learnable toy task: each label has one trigger token, and an example
// carries exactly the labels whose triggers occur in its text. Everything
// else is filler drawn from a shared pool.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "goemo/corpus.hpp"
#include "goemo/features.hpp"

namespace goemo::testing {

struct TriggerTask {
    std::size_t active_labels = kNumLabels;  // labels 0..active-1 get triggers
    std::size_t num_fillers = 20;
    std::size_t embedding_dim = 8;
    double second_label_rate = 0.3;
};

inline std::string trigger_token(std::size_t k) { return "trig" + std::to_string(k); }
inline std::string filler_token(std::size_t j) { return "fill" + std::to_string(j); }

inline Corpus trigger_corpus(const TriggerTask& task, std::size_t n, Split split, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution second(task.second_label_rate);
    std::uniform_int_distribution<std::size_t> filler(0, task.num_fillers - 1);
    std::uniform_int_distribution<std::size_t> length(3, 7);
    std::uniform_int_distribution<int> any_label(0, static_cast<int>(task.active_labels) - 1);
    std::vector<Example> examples;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> labels{any_label(rng)};
        if (second(rng)) {
            const int extra = any_label(rng);
            if (extra != labels.front()) labels.push_back(extra);
        }
        std::vector<std::string> words;
        for (std::size_t w = length(rng); w > 0; --w) words.push_back(filler_token(filler(rng)));
        for (int k : labels) {
            std::uniform_int_distribution<std::size_t> where(0, words.size());
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(where(rng)), trigger_token(static_cast<std::size_t>(k)));
        }
        std::string text;
        for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
        examples.push_back(Example::make("ex" + std::to_string(i), text, LabelSet(labels)));
    }
    return Corpus(std::move(examples), split, LabelVocabulary::goemotions());
}

inline EmbeddingTable trigger_embeddings(const TriggerTask& task, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    EmbeddingTable table(task.embedding_dim);
    auto add = [&](const std::string& token) {
        Vector v(static_cast<Eigen::Index>(task.embedding_dim));
        for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = normal(rng);
        table.add(token, v);
    };
    for (std::size_t k = 0; k < task.active_labels; ++k) add(trigger_token(k));
    for (std::size_t j = 0; j < task.num_fillers; ++j) add(filler_token(j));
    return table;
}

}  // namespace goemo::testing
