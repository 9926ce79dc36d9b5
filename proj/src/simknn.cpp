#include "phenex/simknn.hpp"

#include "phenex/error.hpp"
#include "phenex/parallel.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace phenex {

namespace {

double ratio(double overlap, double size_a, double size_b) {
    const double uni = size_a + size_b - overlap;
    if (!(uni > 0.0)) return 0.0;
    return std::min(1.0, overlap / uni);
}

} // namespace

Scheme parse_scheme(std::string_view name) {
    if (name == "basic") return Scheme::Basic;
    if (name == "isf") return Scheme::Isf;
    if (name == "logisf") return Scheme::LogIsf;
    throw Error(ErrorKind::Usage, "unknown weighting scheme '" + std::string(name) + "'");
}

const char* to_string(Scheme scheme) noexcept {
    switch (scheme) {
    case Scheme::Basic: return "basic";
    case Scheme::Isf: return "isf";
    case Scheme::LogIsf: return "logisf";
    }
    return "?";
}

WeightScheme::WeightScheme(Scheme scheme, std::span<const std::uint64_t> sentence_counts,
                           std::uint64_t unique_sentences)
    : scheme_(scheme), weights_(sentence_counts.size(), 1.0) {
    if (scheme == Scheme::Basic) return;
    const auto n = static_cast<double>(unique_sentences);
    for (std::size_t t = 0; t < sentence_counts.size(); ++t) {
        // A token with n(t) = 0 never occurs in a sentence; its weight is unused.
        if (sentence_counts[t] == 0) continue;
        const double isf = n / static_cast<double>(sentence_counts[t]);
        weights_[t] = scheme == Scheme::Isf ? isf : std::log(isf);
    }
}

WeightScheme::WeightScheme(Scheme scheme, const Vocabulary& vocabulary)
    : WeightScheme(scheme, vocabulary.sentence_counts, vocabulary.unique_sentences) {}

double WeightScheme::size_of(std::span<const TokenId> tokens) const {
    double total = 0.0;
    for (auto t : tokens) total += weights_[t];
    return total;
}

double weighted_jaccard(std::span<const TokenId> a, std::span<const TokenId> b,
                        const WeightScheme& weights) {
    double overlap = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            overlap += weights(a[i]);
            ++i;
            ++j;
        }
    }
    return ratio(overlap, weights.size_of(a), weights.size_of(b));
}

InvertedIndex::InvertedIndex(std::vector<std::vector<TokenId>> sentences, WeightScheme weights)
    : sentences_(std::move(sentences)), weights_(std::move(weights)) {
    const std::size_t vocab = weights_.weights().size();
    offsets_.assign(vocab + 1, 0);
    for (const auto& s : sentences_)
        for (auto t : s) {
            if (t >= vocab) throw Error(ErrorKind::Parse, "token id outside the vocabulary");
            ++offsets_[t + 1];
        }
    for (std::size_t t = 0; t < vocab; ++t) offsets_[t + 1] += offsets_[t];
    postings_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    // Sentences are visited in id order, so each posting list comes out sorted.
    for (SentenceId s = 0; s < sentences_.size(); ++s)
        for (auto t : sentences_[s]) postings_[fill[t]++] = s;
    sizes_.resize(sentences_.size());
    for (SentenceId s = 0; s < sentences_.size(); ++s) sizes_[s] = weights_.size_of(sentences_[s]);
}

std::span<const SentenceId> InvertedIndex::postings(TokenId t) const {
    return std::span<const SentenceId>(postings_).subspan(offsets_[t], offsets_[t + 1] - offsets_[t]);
}

KnnSearcher::KnnSearcher(const InvertedIndex& index)
    : index_(index), overlap_(index.size(), 0.0) {}

void KnnSearcher::accumulate(SentenceId query) {
    touched_.clear();
    const auto& weights = index_.weights();
    for (auto t : index_.tokens(query)) {
        const double w = weights(t);
        // Zero-weight tokens cannot change any similarity.
        if (w == 0.0) continue;
        for (auto s : index_.postings(t)) {
            if (s == query) continue;
            if (overlap_[s] == 0.0) touched_.push_back(s);
            overlap_[s] += w;
        }
    }
}

NeighborList KnnSearcher::search(SentenceId query, std::size_t k) {
    if (query >= index_.size())
        throw Error(ErrorKind::UnknownSentence, "sentence " + std::to_string(query) + " is not indexed");
    accumulate(query);
    auto& out = candidates_;
    out.clear();
    const double own = index_.weighted_size(query);
    for (auto s : touched_) {
        const double sim = ratio(overlap_[s], own, index_.weighted_size(s));
        overlap_[s] = 0.0;
        if (sim > 0.0) out.push_back({s, sim});
    }
    if (out.size() > k) {
        std::nth_element(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(),
                         ranks_before);
        out.resize(k);
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return NeighborList{query, std::vector<Neighbor>(out.begin(), out.end())};
}

double KnnSearcher::similarity_sum(SentenceId query, std::span<const std::uint32_t> group_of,
                                   std::uint32_t group) {
    accumulate(query);
    std::sort(touched_.begin(), touched_.end());
    const double own = index_.weighted_size(query);
    double total = 0.0;
    for (auto s : touched_) {
        if (group_of[s] == group) total += ratio(overlap_[s], own, index_.weighted_size(s));
        overlap_[s] = 0.0;
    }
    return total;
}

NeighborList knn_search(const InvertedIndex& index, SentenceId query, std::size_t k) {
    KnnSearcher searcher(index);
    return searcher.search(query, k);
}

std::vector<NeighborList> knn_all(const InvertedIndex& index, std::size_t k, unsigned threads) {
    std::vector<NeighborList> lists(index.size());
    parallel_for(index.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
        KnnSearcher searcher(index);
        for (std::size_t q = begin; q < end; ++q)
            lists[q] = searcher.search(static_cast<SentenceId>(q), k);
    });
    return lists;
}

void write_neighbors(const std::filesystem::path& path, std::span<const NeighborList> lists,
                     const KnnMeta& meta) {
    {
        auto out = tsv::open_out(path);
        out << "query_id\tneighbor_id\tsimilarity\n";
        for (const auto& list : lists)
            for (const auto& n : list.neighbors)
                out << list.query << '\t' << n.id << '\t' << tsv::fixed(n.similarity, 9) << '\n';
    }
    const nlohmann::json j = {
        {"scheme", to_string(meta.scheme)},
        {"k", meta.k},
        {"sentences", meta.sentences},
        {"sentence_dir", meta.sentence_dir},
    };
    auto out = tsv::open_out(path.string() + ".json");
    out << j.dump(2) << '\n';
}

std::vector<NeighborList> read_neighbors(const std::filesystem::path& path, KnnMeta* meta) {
    KnnMeta m;
    {
        auto in = tsv::open_in(path.string() + ".json");
        try {
            const auto j = nlohmann::json::parse(in);
            m.scheme = parse_scheme(j.at("scheme").get<std::string>());
            m.k = j.at("k").get<std::size_t>();
            m.sentences = j.at("sentences").get<std::size_t>();
            m.sentence_dir = j.value("sentence_dir", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, path.string() + ".json: " + e.what());
        }
    }
    std::vector<NeighborList> lists(m.sentences);
    for (std::size_t i = 0; i < lists.size(); ++i) lists[i].query = static_cast<SentenceId>(i);
    auto in = tsv::open_in(path);
    std::string line;
    tsv::next_line(in, line);
    while (tsv::next_line(in, line)) {
        const auto f = tsv::split(line);
        if (f.size() != 3) throw Error(ErrorKind::Parse, path.string() + ": expected 3 columns");
        const auto q = static_cast<std::size_t>(tsv::parse_int(f[0], "neighbor table"));
        const auto n = static_cast<SentenceId>(tsv::parse_int(f[1], "neighbor table"));
        if (q >= lists.size() || n >= lists.size())
            throw Error(ErrorKind::Parse, path.string() + ": sentence id out of range");
        lists[q].neighbors.push_back({n, tsv::parse_double(f[2], "neighbor table")});
    }
    if (meta) *meta = m;
    return lists;
}

} // namespace phenex
