#pragma once

// kNN graph construction, Louvain community detection and cluster medoids.

#include "phenex/corpus.hpp"
#include "phenex/simknn.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace phenex {

struct Edge {
    std::uint32_t u;
    std::uint32_t v;
    double weight;
};

/// Undirected simple graph in CSR form. Every edge is stored in both endpoint
/// rows; rows are sorted by neighbor id.
class KnnGraph {
public:
    KnnGraph(std::size_t nodes, std::vector<Edge> edges);

    std::size_t nodes() const noexcept { return offsets_.size() - 1; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::span<const Edge> edges() const noexcept { return edges_; }  // u < v, sorted

    struct Arc {
        std::uint32_t to;
        double weight;
    };
    std::span<const Arc> neighbors(std::uint32_t node) const;
    double strength(std::uint32_t node) const { return strength_[node]; }
    double total_weight() const noexcept { return total_weight_; }

private:
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<Arc> arcs_;
    std::vector<double> strength_;
    double total_weight_ = 0.0;
};

/// Symmetrizes the kNN relation by union. A pair listed in both directions
/// must carry the same weight.
KnnGraph build_graph(std::span<const NeighborList> lists, std::size_t nodes);

/// Newman modularity of a node -> community assignment (community ids need not
/// be dense). Graphs without edges score 0.
double modularity(const KnnGraph& graph, std::span<const std::uint32_t> community,
                  double resolution = 1.0);

struct LouvainOptions {
    double resolution = 1.0;
    std::uint64_t seed = 42;
};

struct Partition {
    std::vector<std::uint32_t> community;  // per original node; ids dense, ordered by first member
    std::size_t count = 0;
    double modularity = 0.0;
};

/// levels[0] is the partition after the first local-moving phase converges;
/// later entries are the coarser levels obtained after each aggregation.
struct LouvainResult {
    std::vector<Partition> levels;

    const Partition& first_level() const { return levels.front(); }
};

LouvainResult louvain(const KnnGraph& graph, const LouvainOptions& options = {});

struct Clustering {
    std::vector<std::uint32_t> cluster_of;         // per sentence
    std::vector<std::vector<SentenceId>> members;  // per cluster, ascending
    std::vector<SentenceId> medoids;
    double modularity = 0.0;
};

/// Member minimizing mean distance 1 - similarity to the other members; ties go
/// to the lower sentence id. Pairwise; meant for one cluster at a time.
SentenceId medoid(std::span<const SentenceId> members, const InvertedIndex& index);

/// Medoids for every cluster at once, driven by the inverted index.
std::vector<SentenceId> medoids(const InvertedIndex& index,
                                std::span<const std::uint32_t> cluster_of,
                                std::size_t clusters, unsigned threads = 0);

Clustering make_clustering(const Partition& partition, const InvertedIndex& index,
                           unsigned threads = 0);

struct ClusterSummary {
    std::uint32_t cluster_id;
    std::size_t size;
    SentenceId medoid;
    std::vector<std::string> medoid_tokens;
};

std::vector<ClusterSummary> summarize(const Clustering& clustering, const SentenceTable& table);

/// Clusters whose medoid carries at least two tokens.
std::size_t novelty_count(std::span<const ClusterSummary> clusters);

struct NoveltyCell {
    std::size_t k;
    Scheme scheme;
    std::size_t clusters;
    std::size_t novel;
};

/// Runs kNN + Louvain + medoids for every (k, scheme) pair.
std::vector<NoveltyCell> novelty_grid(const SentenceTable& table, std::span<const std::size_t> ks,
                                      std::span<const Scheme> schemes,
                                      const LouvainOptions& options, unsigned threads = 0);

struct ClusterMeta {
    Scheme scheme = Scheme::LogIsf;
    std::size_t k = 0;
    std::uint64_t seed = 42;
    double resolution = 1.0;
    double modularity = 0.0;
    std::size_t clusters = 0;
    std::size_t levels = 0;
    std::size_t novel = 0;
    std::string sentence_dir;
};

// Cluster directory: assignments.tsv, clusters.tsv and cluster.json.
void write_clustering(const std::filesystem::path& dir, const Clustering& clustering,
                      std::span<const ClusterSummary> summaries, const ClusterMeta& meta);
Clustering read_clustering(const std::filesystem::path& dir, ClusterMeta* meta = nullptr);

} // namespace phenex
