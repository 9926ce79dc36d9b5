#include "phenex/cluster.hpp"

#include "phenex/error.hpp"
#include "phenex/parallel.hpp"
#include "phenex/random.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>

namespace phenex {

KnnGraph::KnnGraph(std::size_t nodes, std::vector<Edge> edges) : edges_(std::move(edges)) {
    for (auto& e : edges_) {
        if (e.u == e.v) throw Error(ErrorKind::Parse, "self-loop on node " + std::to_string(e.u));
        if (e.u >= nodes || e.v >= nodes) throw Error(ErrorKind::Parse, "edge endpoint out of range");
        if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    for (std::size_t i = 1; i < edges_.size(); ++i)
        if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
            throw Error(ErrorKind::Parse, "parallel edge " + std::to_string(edges_[i].u) + "-" +
                                              std::to_string(edges_[i].v));

    offsets_.assign(nodes + 1, 0);
    for (const auto& e : edges_) {
        ++offsets_[e.u + 1];
        ++offsets_[e.v + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    arcs_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    strength_.assign(nodes, 0.0);
    for (const auto& e : edges_) {
        arcs_[fill[e.u]++] = {e.v, e.weight};
        arcs_[fill[e.v]++] = {e.u, e.weight};
        total_weight_ += e.weight;
    }
    for (std::uint32_t n = 0; n < nodes; ++n) {
        auto row = std::span<Arc>(arcs_).subspan(offsets_[n], offsets_[n + 1] - offsets_[n]);
        std::sort(row.begin(), row.end(), [](const Arc& a, const Arc& b) { return a.to < b.to; });
        for (const auto& a : row) strength_[n] += a.weight;
    }
}

std::span<const KnnGraph::Arc> KnnGraph::neighbors(std::uint32_t node) const {
    return std::span<const Arc>(arcs_).subspan(offsets_[node], offsets_[node + 1] - offsets_[node]);
}

KnnGraph build_graph(std::span<const NeighborList> lists, std::size_t nodes) {
    std::vector<Edge> directed;
    for (const auto& list : lists)
        for (const auto& n : list.neighbors) {
            const auto a = std::min(list.query, n.id);
            const auto b = std::max(list.query, n.id);
            directed.push_back({a, b, n.similarity});
        }
    std::sort(directed.begin(), directed.end(),
              [](const Edge& x, const Edge& y) { return x.u != y.u ? x.u < y.u : x.v < y.v; });
    std::vector<Edge> edges;
    for (const auto& e : directed) {
        if (!edges.empty() && edges.back().u == e.u && edges.back().v == e.v) {
            if (edges.back().weight != e.weight)
                throw Error(ErrorKind::Parse, "asymmetric similarity between sentences " +
                                                  std::to_string(e.u) + " and " + std::to_string(e.v));
            continue;
        }
        edges.push_back(e);
    }
    return KnnGraph(nodes, std::move(edges));
}

double modularity(const KnnGraph& graph, std::span<const std::uint32_t> community,
                  double resolution) {
    const double m2 = 2.0 * graph.total_weight();
    if (m2 <= 0.0) return 0.0;
    const auto max_id = community.empty() ? 0u : *std::max_element(community.begin(), community.end());
    std::vector<double> internal(max_id + 1, 0.0);
    std::vector<double> total(max_id + 1, 0.0);
    for (const auto& e : graph.edges())
        if (community[e.u] == community[e.v]) internal[community[e.u]] += 2.0 * e.weight;
    for (std::uint32_t n = 0; n < graph.nodes(); ++n) total[community[n]] += graph.strength(n);
    double q = 0.0;
    for (std::size_t c = 0; c <= max_id; ++c) {
        const double share = total[c] / m2;
        q += internal[c] / m2 - resolution * share * share;
    }
    return q;
}

namespace {

// Graph at one Louvain level. Diagonal entries A_ii (twice the weight folded
// into an aggregated node) are kept apart from the off-diagonal arcs.
struct WorkGraph {
    std::vector<std::size_t> offsets;
    std::vector<KnnGraph::Arc> arcs;
    std::vector<double> self;
    std::vector<double> strength;

    std::size_t size() const { return strength.size(); }
};

WorkGraph from_graph(const KnnGraph& g) {
    WorkGraph w;
    w.offsets.push_back(0);
    for (std::uint32_t n = 0; n < g.nodes(); ++n) {
        for (const auto& a : g.neighbors(n)) w.arcs.push_back(a);
        w.offsets.push_back(w.arcs.size());
        w.self.push_back(0.0);
        w.strength.push_back(g.strength(n));
    }
    return w;
}

constexpr double kGainEpsilon = 1e-12;

// One local-moving phase. Returns true if any node changed community.
bool local_move(const WorkGraph& g, double resolution, Engine& rng,
                std::vector<std::uint32_t>& community) {
    const std::size_t n = g.size();
    community.resize(n);
    std::iota(community.begin(), community.end(), 0u);
    double m2 = 0.0;
    for (double s : g.strength) m2 += s;
    if (m2 <= 0.0) return false;

    std::vector<double> total(g.strength);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    shuffle(std::span<std::uint32_t>(order), rng);

    std::vector<double> link(n, -1.0);
    std::vector<std::uint32_t> seen;
    bool moved_any = false;
    for (int pass = 0; pass < 10000; ++pass) {
        std::size_t moves = 0;
        for (auto node : order) {
            const auto current = community[node];
            const double k = g.strength[node];
            seen.clear();
            for (std::size_t a = g.offsets[node]; a < g.offsets[node + 1]; ++a) {
                const auto c = community[g.arcs[a].to];
                if (link[c] < 0.0) {
                    link[c] = 0.0;
                    seen.push_back(c);
                }
                link[c] += g.arcs[a].weight;
            }
            total[current] -= k;
            const double own_link = link[current] < 0.0 ? 0.0 : link[current];
            auto best = current;
            double best_gain = own_link - resolution * total[current] * k / m2;
            for (auto c : seen) {
                if (c == current) continue;
                const double gain = link[c] - resolution * total[c] * k / m2;
                if (gain > best_gain + kGainEpsilon) {
                    best = c;
                    best_gain = gain;
                }
            }
            total[best] += k;
            community[node] = best;
            if (best != current) ++moves;
            for (auto c : seen) link[c] = -1.0;
        }
        if (moves == 0) break;
        moved_any = true;
    }
    return moved_any;
}

std::size_t renumber(std::vector<std::uint32_t>& community) {
    std::vector<std::uint32_t> remap(community.size(), UINT32_MAX);
    std::uint32_t next = 0;
    for (auto& c : community) {
        if (remap[c] == UINT32_MAX) remap[c] = next++;
        c = remap[c];
    }
    return next;
}

WorkGraph aggregate(const WorkGraph& g, std::span<const std::uint32_t> community,
                    std::size_t communities) {
    std::vector<std::vector<std::uint32_t>> members(communities);
    for (std::uint32_t n = 0; n < g.size(); ++n) members[community[n]].push_back(n);

    WorkGraph out;
    out.offsets.push_back(0);
    out.self.assign(communities, 0.0);
    out.strength.assign(communities, 0.0);
    std::vector<double> link(communities, 0.0);
    std::vector<std::uint32_t> seen;
    for (std::uint32_t c = 0; c < communities; ++c) {
        seen.clear();
        for (auto n : members[c]) {
            out.self[c] += g.self[n];
            out.strength[c] += g.strength[n];
            for (std::size_t a = g.offsets[n]; a < g.offsets[n + 1]; ++a) {
                const auto d = community[g.arcs[a].to];
                if (d == c) {
                    out.self[c] += g.arcs[a].weight;
                    continue;
                }
                if (link[d] == 0.0) seen.push_back(d);
                link[d] += g.arcs[a].weight;
            }
        }
        std::sort(seen.begin(), seen.end());
        for (auto d : seen) {
            out.arcs.push_back({d, link[d]});
            link[d] = 0.0;
        }
        out.offsets.push_back(out.arcs.size());
    }
    return out;
}

} // namespace

LouvainResult louvain(const KnnGraph& graph, const LouvainOptions& options) {
    LouvainResult result;
    Engine rng(options.seed);
    WorkGraph work = from_graph(graph);
    std::vector<std::uint32_t> node_of(graph.nodes());
    std::iota(node_of.begin(), node_of.end(), 0u);
    std::vector<std::uint32_t> community;

    for (;;) {
        const bool moved = local_move(work, options.resolution, rng, community);
        if (!moved && !result.levels.empty()) break;
        const auto count = renumber(community);

        Partition level;
        level.community.resize(graph.nodes());
        for (std::size_t n = 0; n < graph.nodes(); ++n) level.community[n] = community[node_of[n]];
        level.count = renumber(level.community);
        level.modularity = modularity(graph, level.community, options.resolution);
        result.levels.push_back(std::move(level));

        if (!moved || count == work.size()) break;
        for (auto& n : node_of) n = community[n];
        work = aggregate(work, community, count);
    }
    return result;
}

SentenceId medoid(std::span<const SentenceId> members, const InvertedIndex& index) {
    std::vector<SentenceId> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    SentenceId best = sorted.front();
    double best_sum = -1.0;
    for (auto u : sorted) {
        double sum = 0.0;
        for (auto v : sorted)
            if (v != u) sum += weighted_jaccard(index.tokens(u), index.tokens(v), index.weights());
        if (sum > best_sum) {
            best_sum = sum;
            best = u;
        }
    }
    return best;
}

std::vector<SentenceId> medoids(const InvertedIndex& index,
                                std::span<const std::uint32_t> cluster_of, std::size_t clusters,
                                unsigned threads) {
    // Maximizing the similarity sum is the same as minimizing mean distance
    // 1 - similarity, since every member divides by the same |C| - 1.
    std::vector<double> sums(index.size(), 0.0);
    parallel_for(index.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
        KnnSearcher searcher(index);
        for (std::size_t s = begin; s < end; ++s)
            sums[s] = searcher.similarity_sum(static_cast<SentenceId>(s), cluster_of, cluster_of[s]);
    });
    std::vector<SentenceId> best(clusters, UINT32_MAX);
    std::vector<double> best_sum(clusters, -1.0);
    for (SentenceId s = 0; s < index.size(); ++s) {
        const auto c = cluster_of[s];
        if (sums[s] > best_sum[c]) {
            best_sum[c] = sums[s];
            best[c] = s;
        }
    }
    return best;
}

Clustering make_clustering(const Partition& partition, const InvertedIndex& index,
                           unsigned threads) {
    Clustering c;
    c.cluster_of = partition.community;
    c.members.resize(partition.count);
    for (SentenceId s = 0; s < c.cluster_of.size(); ++s) c.members[c.cluster_of[s]].push_back(s);
    c.medoids = medoids(index, c.cluster_of, partition.count, threads);
    c.modularity = partition.modularity;
    return c;
}

std::vector<ClusterSummary> summarize(const Clustering& clustering, const SentenceTable& table) {
    std::vector<ClusterSummary> out;
    out.reserve(clustering.members.size());
    for (std::uint32_t c = 0; c < clustering.members.size(); ++c) {
        ClusterSummary s{c, clustering.members[c].size(), clustering.medoids[c], {}};
        for (auto t : table.sentences[s.medoid].tokens)
            s.medoid_tokens.push_back(table.vocabulary.tokens[t]);
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t novelty_count(std::span<const ClusterSummary> clusters) {
    return static_cast<std::size_t>(std::count_if(
        clusters.begin(), clusters.end(), [](const auto& c) { return c.medoid_tokens.size() >= 2; }));
}

std::vector<NoveltyCell> novelty_grid(const SentenceTable& table, std::span<const std::size_t> ks,
                                      std::span<const Scheme> schemes,
                                      const LouvainOptions& options, unsigned threads) {
    std::vector<NoveltyCell> cells;
    for (auto k : ks)
        for (auto scheme : schemes) {
            InvertedIndex index(table.token_sets(), WeightScheme(scheme, table.vocabulary));
            const auto lists = knn_all(index, k, threads);
            const auto graph = build_graph(lists, index.size());
            const auto levels = louvain(graph, options);
            const auto clustering = make_clustering(levels.first_level(), index, threads);
            const auto summary = summarize(clustering, table);
            cells.push_back({k, scheme, summary.size(), novelty_count(summary)});
        }
    return cells;
}

void write_clustering(const std::filesystem::path& dir, const Clustering& clustering,
                      std::span<const ClusterSummary> summaries, const ClusterMeta& meta) {
    std::filesystem::create_directories(dir);
    {
        auto out = tsv::open_out(dir / "assignments.tsv");
        out << "sentence_id\tcluster_id\n";
        for (SentenceId s = 0; s < clustering.cluster_of.size(); ++s)
            out << s << '\t' << clustering.cluster_of[s] << '\n';
    }
    {
        auto out = tsv::open_out(dir / "clusters.tsv");
        out << "cluster_id\tsize\tmedoid_sentence_id\tmedoid_tokens\n";
        for (const auto& s : summaries) {
            out << s.cluster_id << '\t' << s.size << '\t' << s.medoid << '\t';
            for (std::size_t i = 0; i < s.medoid_tokens.size(); ++i)
                out << (i ? " " : "") << s.medoid_tokens[i];
            out << '\n';
        }
    }
    const nlohmann::json j = {
        {"scheme", to_string(meta.scheme)},
        {"k", meta.k},
        {"seed", meta.seed},
        {"resolution", meta.resolution},
        {"modularity", tsv::real(meta.modularity)},
        {"clusters", meta.clusters},
        {"levels", meta.levels},
        {"novel_clusters", meta.novel},
        {"sentence_dir", meta.sentence_dir},
    };
    auto out = tsv::open_out(dir / "cluster.json");
    out << j.dump(2) << '\n';
}

Clustering read_clustering(const std::filesystem::path& dir, ClusterMeta* meta) {
    Clustering c;
    std::string line;
    {
        auto in = tsv::open_in(dir / "assignments.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 2) throw Error(ErrorKind::Parse, "assignments.tsv: expected 2 columns");
            const auto s = tsv::parse_int(f[0], "assignments.tsv");
            if (s != static_cast<long long>(c.cluster_of.size()))
                throw Error(ErrorKind::Parse, "assignments.tsv: sentence ids must be dense and ordered");
            c.cluster_of.push_back(static_cast<std::uint32_t>(tsv::parse_int(f[1], "assignments.tsv")));
        }
    }
    {
        auto in = tsv::open_in(dir / "clusters.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 4) throw Error(ErrorKind::Parse, "clusters.tsv: expected 4 columns");
            c.medoids.push_back(static_cast<SentenceId>(tsv::parse_int(f[2], "clusters.tsv")));
        }
    }
    c.members.resize(c.medoids.size());
    for (SentenceId s = 0; s < c.cluster_of.size(); ++s) {
        if (c.cluster_of[s] >= c.members.size())
            throw Error(ErrorKind::Parse, "assignments.tsv: unknown cluster id");
        c.members[c.cluster_of[s]].push_back(s);
    }
    ClusterMeta m;
    {
        auto in = tsv::open_in(dir / "cluster.json");
        try {
            const auto j = nlohmann::json::parse(in);
            m.scheme = parse_scheme(j.at("scheme").get<std::string>());
            m.k = j.at("k").get<std::size_t>();
            m.seed = j.at("seed").get<std::uint64_t>();
            m.resolution = j.at("resolution").get<double>();
            m.modularity = tsv::parse_double(j.at("modularity").get<std::string>(), "cluster.json");
            m.clusters = j.at("clusters").get<std::size_t>();
            m.levels = j.at("levels").get<std::size_t>();
            m.novel = j.at("novel_clusters").get<std::size_t>();
            m.sentence_dir = j.value("sentence_dir", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, (dir / "cluster.json").string() + ": " + e.what());
        }
    }
    c.modularity = m.modularity;
    if (meta) *meta = m;
    return c;
}

} // namespace phenex
