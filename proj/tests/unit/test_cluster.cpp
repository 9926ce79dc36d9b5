#include <doctest.h>

#include "phenex/cluster.hpp"
#include "phenex/error.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <set>

using namespace phenex;
using Set = std::vector<TokenId>;

namespace {

KnnGraph make_graph(int n, const std::vector<oracle::WeightedEdge>& edges) {
    std::vector<Edge> e;
    for (const auto& x : edges)
        e.push_back({static_cast<std::uint32_t>(x.u), static_cast<std::uint32_t>(x.v), x.w});
    return KnnGraph(static_cast<std::size_t>(n), std::move(e));
}

std::vector<oracle::WeightedEdge> triangles() {
    return {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}};
}

std::vector<oracle::WeightedEdge> k4() {
    return {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}};
}

InvertedIndex basic_index(const std::vector<Set>& sets, std::size_t vocab) {
    const auto [n, total] = oracle::counts(sets, vocab);
    return InvertedIndex(sets, WeightScheme(Scheme::Basic, n, total));
}

} // namespace

TEST_CASE("graph construction symmetrizes by union") {
    // 0->1, 1->0 (same weight), 2->1, 3 has no neighbors, 4->0.
    const std::vector<NeighborList> lists{
        {0, {{1, 0.5}}}, {1, {{0, 0.5}}}, {2, {{1, 0.25}}}, {3, {}}, {4, {{0, 0.125}}}};
    const auto g = build_graph(lists, 5);
    REQUIRE(g.edge_count() == 3);
    CHECK(g.edges()[0].u == 0);
    CHECK(g.edges()[0].v == 1);
    CHECK(g.edges()[1].u == 0);
    CHECK(g.edges()[1].v == 4);
    CHECK(g.edges()[2].u == 1);
    CHECK(g.edges()[2].v == 2);
    CHECK(g.neighbors(3).empty());
    CHECK(g.strength(0) == 0.625);
    CHECK(g.total_weight() == 0.875);

    const std::vector<NeighborList> asym{{0, {{1, 0.5}}}, {1, {{0, 0.4}}}};
    CHECK_THROWS_AS(build_graph(asym, 2), Error);
    CHECK(build_graph(std::vector<NeighborList>(3), 3).edge_count() == 0);
    CHECK_THROWS_AS(KnnGraph(2, {{0, 0, 1.0}}), Error);
    CHECK_THROWS_AS(KnnGraph(2, {{0, 1, 1.0}, {1, 0, 1.0}}), Error);
}

TEST_CASE("modularity matches the adjacency-matrix definition") {
    Engine rng(2);
    for (int round = 0; round < 30; ++round) {
        const int n = 2 + static_cast<int>(uniform_below(rng, 8));
        std::vector<oracle::WeightedEdge> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (bernoulli(rng, 0.4)) edges.push_back({u, v, 0.1 + uniform01(rng)});
        const auto g = make_graph(n, edges);
        std::vector<std::uint32_t> c(static_cast<std::size_t>(n));
        std::vector<int> ci(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) ci[i] = static_cast<int>(c[i] = static_cast<std::uint32_t>(uniform_below(rng, 3)));
        for (double res : {0.5, 1.0, 2.0})
            CHECK(modularity(g, c, res) == doctest::Approx(oracle::modularity(n, edges, ci, res)).epsilon(1e-12));
    }
}

TEST_CASE("louvain: two disjoint triangles give the two components") {
    const auto edges = triangles();
    const auto g = make_graph(6, edges);
    std::vector<int> best;
    const double q = oracle::best_modularity(6, edges, &best);
    const auto p = louvain(g).first_level();
    CHECK(p.count == 2);
    CHECK(oracle::canonical(p.community) == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(oracle::canonical(p.community) == best);
    CHECK(p.modularity == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("louvain: K4 is one cluster") {
    const auto edges = k4();
    std::vector<int> best;
    const double q = oracle::best_modularity(4, edges, &best);
    const auto p = louvain(make_graph(4, edges)).first_level();
    CHECK(p.count == 1);
    CHECK(oracle::canonical(p.community) == best);
    CHECK(p.modularity == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("louvain: isolated nodes stay singletons") {
    const auto p = louvain(KnnGraph(4, {})).first_level();
    CHECK(p.count == 4);
    CHECK(p.modularity == 0.0);
}

TEST_CASE("louvain on small random graphs never beats the exhaustive optimum") {
    Engine rng(4);
    for (int round = 0; round < 40; ++round) {
        const int n = 3 + static_cast<int>(uniform_below(rng, 6));
        std::vector<oracle::WeightedEdge> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (bernoulli(rng, 0.45)) edges.push_back({u, v, 0.05 + uniform01(rng)});
        const auto g = make_graph(n, edges);
        const double best = oracle::best_modularity(n, edges);
        std::vector<int> singletons(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) singletons[i] = i;
        const double floor = oracle::modularity(n, edges, singletons);
        const auto result = louvain(g, {1.0, 42});
        for (const auto& level : result.levels) {
            std::vector<int> c(level.community.begin(), level.community.end());
            CHECK(level.modularity == doctest::Approx(oracle::modularity(n, edges, c)).epsilon(1e-12));
            CHECK(level.modularity <= best + 1e-12);
            CHECK(level.modularity >= floor - 1e-12);
        }
    }
}

TEST_CASE("louvain: disconnected cliques are recovered exactly") {
    std::vector<oracle::WeightedEdge> edges;
    const std::vector<int> sizes{3, 5, 4, 6};
    int base = 0;
    std::vector<int> truth;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (int i = 0; i < sizes[c]; ++i) {
            truth.push_back(static_cast<int>(c));
            for (int j = i + 1; j < sizes[c]; ++j) edges.push_back({base + i, base + j, 1.0});
        }
        base += sizes[c];
    }
    for (std::uint64_t seed : {1u, 42u, 99u}) {
        const auto p = louvain(make_graph(base, edges), {1.0, seed}).first_level();
        CHECK(oracle::canonical(p.community) == truth);
    }
}

TEST_CASE("louvain is deterministic for a seed") {
    Engine rng(6);
    std::vector<Edge> edges;
    const std::uint32_t n = 300;
    for (std::uint32_t u = 0; u < n; ++u)
        for (int t = 0; t < 4; ++t) {
            // Planted blocks of 30 plus noise.
            const auto v = bernoulli(rng, 0.8) ? (u / 30) * 30 + static_cast<std::uint32_t>(uniform_below(rng, 30))
                                               : static_cast<std::uint32_t>(uniform_below(rng, n));
            if (v == u) continue;
            edges.push_back({std::min(u, v), std::max(u, v), 0.1 + uniform01(rng)});
        }
    std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    edges.erase(std::unique(edges.begin(), edges.end(), [](auto& a, auto& b) { return a.u == b.u && a.v == b.v; }),
                edges.end());
    const KnnGraph g(n, edges);
    const auto first = louvain(g, {1.0, 42});
    for (int run = 0; run < 5; ++run) {
        const auto again = louvain(g, {1.0, 42});
        REQUIRE(again.levels.size() == first.levels.size());
        for (std::size_t l = 0; l < first.levels.size(); ++l) {
            CHECK(again.levels[l].community == first.levels[l].community);
            CHECK(again.levels[l].modularity == first.levels[l].modularity);
        }
    }
    // Coarser levels never lose modularity.
    for (std::size_t l = 1; l < first.levels.size(); ++l)
        CHECK(first.levels[l].modularity >= first.levels[l - 1].modularity - 1e-12);
}

TEST_CASE("medoid examples") {
    // x = {1,2,3,4}, y = {1,2,3,4,5}, z = {2,3,4}:
    // φ(x,y) = 0.8, φ(x,z) = 0.75, φ(y,z) = 0.6, mean distances 0.225 / 0.3 / 0.325.
    const std::vector<Set> sets{{1, 2, 3, 4, 5}, {1, 2, 3, 4}, {2, 3, 4}};
    const auto index = basic_index(sets, 6);
    CHECK(medoid(std::vector<SentenceId>{0, 1, 2}, index) == 1);
    CHECK(medoid(std::vector<SentenceId>{2}, index) == 2);

    // Three pairwise-equal similarities: lowest id.
    const std::vector<Set> ring{{1, 2}, {2, 3}, {1, 3}};
    const auto ring_index = basic_index(ring, 4);
    CHECK(medoid(std::vector<SentenceId>{2, 1, 0}, ring_index) == 0);
}

TEST_CASE("index-driven medoids agree with the exhaustive definition") {
    Engine rng(9);
    for (int round = 0; round < 10; ++round) {
        const auto sets = oracle::random_sets(rng, 150, 40, 6);
        const auto [n, total] = oracle::counts(sets, 40);
        const WeightScheme w(Scheme::LogIsf, n, total);
        const InvertedIndex index(sets, w);
        const std::vector<double> wv(w.weights().begin(), w.weights().end());
        const auto graph = build_graph(knn_all(index, 10, 1), sets.size());
        const auto part = louvain(graph).first_level();
        const auto clustering = make_clustering(part, index, 2);
        const auto single = make_clustering(part, index, 1);
        CHECK(clustering.medoids == single.medoids);
        std::set<SentenceId> covered;
        for (std::size_t c = 0; c < clustering.members.size(); ++c) {
            const auto& members = clustering.members[c];
            for (auto s : members) {
                CHECK(covered.insert(s).second);
                CHECK(clustering.cluster_of[s] == c);
            }
            const auto want = oracle::medoid(members, sets, wv);
            CHECK(clustering.medoids[c] == want);
            CHECK(medoid(members, index) == want);
        }
        CHECK(covered.size() == sets.size());
    }
}

TEST_CASE("novelty count on planted families") {
    // Six families with 3-token cores; each variant adds one token of its own,
    // so families are cliques with no edges between them.
    std::vector<Set> sets;
    TokenId next = 100;
    for (TokenId f = 0; f < 6; ++f)
        for (int v = 0; v < 8; ++v) {
            Set s{3 * f, 3 * f + 1, 3 * f + 2, next++};
            sets.push_back(s);
        }
    const auto [n, total] = oracle::counts(sets, next);
    const InvertedIndex index(sets, WeightScheme(Scheme::LogIsf, n, total));
    const auto part = louvain(build_graph(knn_all(index, 50, 1), sets.size())).first_level();
    const auto clustering = make_clustering(part, index, 1);
    CHECK(clustering.members.size() == 6);

    SentenceTable table;
    for (TokenId t = 0; t < next; ++t) table.vocabulary.tokens.push_back("t" + std::to_string(t));
    for (SentenceId s = 0; s < sets.size(); ++s) table.sentences.push_back({s, sets[s], {}});
    const auto summaries = summarize(clustering, table);
    CHECK(novelty_count(summaries) == 6);
    for (const auto& s : summaries) CHECK(s.medoid_tokens.size() == 4);

    std::vector<ClusterSummary> single_token{{0, 3, 0, {"a"}}, {1, 1, 1, {"b"}}};
    CHECK(novelty_count(single_token) == 0);
}

TEST_CASE("cluster directory round trip") {
    const std::vector<Set> sets{{0, 1}, {0, 1, 2}, {3, 4}, {3, 4, 5}, {6}};
    const auto index = basic_index(sets, 7);
    const auto part = louvain(build_graph(knn_all(index, 3, 1), sets.size())).first_level();
    const auto clustering = make_clustering(part, index, 1);
    SentenceTable table;
    for (TokenId t = 0; t < 7; ++t) table.vocabulary.tokens.push_back(std::string(1, static_cast<char>('a' + t)));
    for (SentenceId s = 0; s < sets.size(); ++s) table.sentences.push_back({s, sets[s], {}});
    const auto summaries = summarize(clustering, table);

    const auto dir = std::filesystem::temp_directory_path() / "phenex_cluster_io";
    std::filesystem::remove_all(dir);
    ClusterMeta meta;
    meta.scheme = Scheme::Basic;
    meta.k = 3;
    meta.modularity = clustering.modularity;
    meta.clusters = clustering.members.size();
    meta.sentence_dir = "../tokens";
    write_clustering(dir, clustering, summaries, meta);
    ClusterMeta back_meta;
    const auto back = read_clustering(dir, &back_meta);
    CHECK(back.cluster_of == clustering.cluster_of);
    CHECK(back.members == clustering.members);
    CHECK(back.medoids == clustering.medoids);
    CHECK(back.modularity == clustering.modularity);
    CHECK(back_meta.scheme == Scheme::Basic);
    CHECK(back_meta.k == 3);
    CHECK(back_meta.seed == 42);
    CHECK(back_meta.sentence_dir == "../tokens");
    CHECK(clustering.members.size() == 3);
    std::filesystem::remove_all(dir);
}
