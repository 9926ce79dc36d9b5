#pragma once

// Weighted Jaccard similarity and exact top-k search over an inverted index.

#include "phenex/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phenex {

enum class Scheme { Basic, Isf, LogIsf };

Scheme parse_scheme(std::string_view name);
const char* to_string(Scheme scheme) noexcept;

/// Per-token weights w(t): 1 (Basic), N/n(t) (ISF) or ln(N/n(t)) (LogISF).
class WeightScheme {
public:
    WeightScheme() = default;
    WeightScheme(Scheme scheme, std::span<const std::uint64_t> sentence_counts,
                 std::uint64_t unique_sentences);
    WeightScheme(Scheme scheme, const Vocabulary& vocabulary);

    Scheme scheme() const noexcept { return scheme_; }
    double operator()(TokenId t) const { return weights_[t]; }
    std::span<const double> weights() const noexcept { return weights_; }

    /// Weighted set size, summed in ascending token order.
    double size_of(std::span<const TokenId> tokens) const;

private:
    Scheme scheme_ = Scheme::Basic;
    std::vector<double> weights_;
};

/// Sum of weights over A∩B divided by the sum over A∪B; 0 when the union
/// weighs nothing. Inputs are ascending duplicate-free token lists.
///
/// The union weight is taken as |A| + |B| - |A∩B| with every partial sum
/// accumulated in ascending token order, so the value is bit-for-bit
/// symmetric and matches the index-driven search.
double weighted_jaccard(std::span<const TokenId> a, std::span<const TokenId> b,
                        const WeightScheme& weights);

struct Neighbor {
    SentenceId id;
    double similarity;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborList {
    SentenceId query = 0;
    std::vector<Neighbor> neighbors;  // similarity desc, then id asc

    friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// Ranking used everywhere a top-k is cut: higher similarity first, then the
/// lower sentence id.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) noexcept {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
}

class InvertedIndex {
public:
    InvertedIndex(std::vector<std::vector<TokenId>> sentences, WeightScheme weights);

    std::size_t size() const noexcept { return sentences_.size(); }
    const WeightScheme& weights() const noexcept { return weights_; }
    std::span<const TokenId> tokens(SentenceId s) const { return sentences_[s]; }
    std::span<const SentenceId> postings(TokenId t) const;
    double weighted_size(SentenceId s) const { return sizes_[s]; }
    std::size_t vocabulary_size() const noexcept { return offsets_.size() - 1; }

private:
    std::vector<std::vector<TokenId>> sentences_;
    WeightScheme weights_;
    std::vector<std::size_t> offsets_;  // CSR over postings_
    std::vector<SentenceId> postings_;
    std::vector<double> sizes_;
};

/// Candidate-accumulation search with reusable scratch space. One searcher per
/// thread.
class KnnSearcher {
public:
    explicit KnnSearcher(const InvertedIndex& index);

    NeighborList search(SentenceId query, std::size_t k);

    /// Sum of similarities from `query` to every other sentence whose
    /// membership flag is set, taken in ascending sentence-id order.
    double similarity_sum(SentenceId query, std::span<const std::uint32_t> group_of,
                          std::uint32_t group);

private:
    void accumulate(SentenceId query);

    const InvertedIndex& index_;
    std::vector<double> overlap_;
    std::vector<SentenceId> touched_;
    std::vector<Neighbor> candidates_;
};

/// Throws UnknownSentence when the query is not indexed.
NeighborList knn_search(const InvertedIndex& index, SentenceId query, std::size_t k);

/// One list per sentence, in sentence order. Output does not depend on the
/// thread count.
std::vector<NeighborList> knn_all(const InvertedIndex& index, std::size_t k, unsigned threads = 0);

struct KnnMeta {
    Scheme scheme = Scheme::LogIsf;
    std::size_t k = 50;
    std::size_t sentences = 0;
    std::string sentence_dir;
};

/// Neighbor table: header line then `query_id neighbor_id similarity` rows with
/// nine decimals; metadata goes to `<path>.json`.
void write_neighbors(const std::filesystem::path& path, std::span<const NeighborList> lists,
                     const KnnMeta& meta);
std::vector<NeighborList> read_neighbors(const std::filesystem::path& path, KnnMeta* meta = nullptr);

} // namespace phenex
