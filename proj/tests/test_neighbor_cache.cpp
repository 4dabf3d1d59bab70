#include "testutil.hpp"

#include "gx/neighbor_cache.hpp"

using namespace gx;
using gxtest::TempDir;

namespace {

GraphFile make_graph(const TempDir& dir, const std::vector<std::pair<NodeId, NodeId>>& edges,
                     std::uint64_t n) {
    persist_graph(build_csc(edges, n), dir / "g.bin");
    return GraphFile::open(dir / "g.bin");
}

/// Independent reimplementation of the greedy admission rule, operating on
/// the in-memory graph.
std::vector<NodeId> greedy_admission_oracle(const CscGraph& g, std::uint64_t budget_bytes) {
    auto out = g.out_degrees();
    struct Entry {
        double score;
        NodeId id;
    };
    std::vector<Entry> entries;
    for (NodeId v = 0; v < g.num_nodes; ++v)
        if (g.in_degree(v) > 0)
            entries.push_back({static_cast<double>(out[v]) / static_cast<double>(g.in_degree(v)), v});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    std::uint64_t used = g.num_nodes * 8;
    std::vector<NodeId> admitted;
    for (auto& e : entries) {
        std::uint64_t region = (1 + g.in_degree(e.id)) * 8;
        if (used + region > budget_bytes) continue;
        used += region;
        admitted.push_back(e.id);
    }
    std::sort(admitted.begin(), admitted.end());
    return admitted;
}

} // namespace

TEST_CASE("importance scores are out-degree over in-degree") {
    // Node 0: out 6 (to 1..6), in 2. Node 1: out 0, in 5. Node 7: in 0.
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId d = 1; d <= 6; ++d) edges.push_back({0, d});
    edges.push_back({2, 0});
    edges.push_back({3, 0});
    for (NodeId s = 2; s <= 5; ++s) edges.push_back({s, 1});
    edges.push_back({6, 1});
    CscGraph g = build_csc(edges, 8);
    std::vector<std::uint64_t> indeg(g.num_nodes);
    for (NodeId v = 0; v < g.num_nodes; ++v) indeg[v] = g.in_degree(v);
    auto scores = score_nodes(indeg, g.out_degrees());
    CHECK(scores[0] == 3.0);
    CHECK(scores[1] == 0.0);
    CHECK(std::isnan(scores[7]));
}

TEST_CASE("admission respects priority and budget") {
    SECTION("budget of exactly the address table caches nothing") {
        TempDir dir;
        auto f = make_graph(dir, {{0, 1}, {1, 0}}, 2);
        NeighborCache c = build_neighbor_cache(f, 2 * 8);
        CHECK(c.cached_node_count() == 0);
        CHECK(!c.lookup(0).has_value());
        CHECK(!c.lookup(1).has_value());
    }
    SECTION("budget below the table is an error") {
        TempDir dir;
        auto f = make_graph(dir, {{0, 1}}, 2);
        CHECK_THROWS_AS(build_neighbor_cache(f, 8), std::invalid_argument);
    }
    SECTION("higher score wins the last slot") {
        // Node 0: out 3, in 1 -> score 3.0. Node 1: out 1, in 1 -> score 1.0.
        TempDir dir;
        std::vector<std::pair<NodeId, NodeId>> edges{{0, 2}, {0, 3}, {0, 4},
                                                     {4, 0}, {1, 5}, {5, 1}};
        auto f = make_graph(dir, edges, 6);
        // Budget: table (6*8) + one 2-cell region (16 bytes).
        NeighborCache c = build_neighbor_cache(f, 6 * 8 + 16);
        CHECK(c.cached_node_count() >= 1);
        REQUIRE(c.lookup(0).has_value());
        CHECK(!c.lookup(1).has_value());
    }
    SECTION("random graphs match the greedy oracle, including skip-and-continue") {
        SplitMix64 rng(31);
        for (int t = 0; t < 25; ++t) {
            std::uint64_t n = 20 + rng.bounded(200);
            auto edges = gxtest::random_edges(n, 4 * n, 1000 + t);
            CscGraph g = build_csc(edges, n);
            TempDir dir;
            persist_graph(g, dir / "g.bin");
            GraphFile f = GraphFile::open(dir / "g.bin");
            std::uint64_t budget = n * 8 + rng.bounded(n * 16);
            NeighborCache c = build_neighbor_cache(f, budget);
            std::vector<NodeId> admitted;
            for (NodeId v = 0; v < n; ++v)
                if (c.lookup(v)) admitted.push_back(v);
            REQUIRE(admitted == greedy_admission_oracle(g, budget));
            CHECK(c.bytes_used() <= budget);
        }
    }
}

TEST_CASE("lookup follows the address table indirection") {
    // Build a cache by hand in the documented layout: address_table[1] = 3
    // means node 1's region starts at cache_array[3]; cache_array[3] = 4 means
    // four neighbor ids follow in cache_array[4..8).
    NeighborCache c;
    c.address_table = {-1, 3, -1, -1, -1, 0, -1, -1, -1, -1};
    c.cache_array = {2, 8, 9, 4, 2, 3, 5, 7};
    SECTION("hit walks exactly table -> count -> payload") {
        auto hit = c.lookup(1);
        REQUIRE(hit.has_value());
        CHECK(std::vector<NodeId>(hit->begin(), hit->end()) == std::vector<NodeId>{2, 3, 5, 7});
        auto hit5 = c.lookup(5);
        REQUIRE(hit5.has_value());
        CHECK(std::vector<NodeId>(hit5->begin(), hit5->end()) == std::vector<NodeId>{8, 9});
    }
    SECTION("negative entry is a miss") {
        CHECK(!c.lookup(0).has_value());
        CHECK(!c.lookup(9).has_value());
    }
}

TEST_CASE("cached lists equal the on-disk lists") {
    gxtest::DiskGraph dg(150, 1200, 77);
    NeighborCache c = build_neighbor_cache(dg.file, 150 * 8 + 600 * 8);
    CHECK(c.cached_node_count() > 0);
    IoStats s;
    for (NodeId v = 0; v < 150; ++v) {
        auto disk = dg.file.read_in_neighbors(v, s);
        if (auto hit = c.lookup(v)) {
            CHECK(std::vector<NodeId>(hit->begin(), hit->end()) == disk);
        }
    }
    // Nodes with in-degree zero are never cached.
    for (NodeId v = 0; v < 150; ++v)
        if (dg.file.in_degree(v) == 0) CHECK(!c.lookup(v).has_value());
}

TEST_CASE("neighbor cache persistence") {
    SECTION("round-trip equality") {
        gxtest::DiskGraph dg(100, 900, 55);
        NeighborCache c = build_neighbor_cache(dg.file, 100 * 8 + 400 * 8);
        TempDir dir;
        persist_neighbor_cache(c, dir / "nc.bin");
        IoStats s;
        NeighborCache back = load_neighbor_cache(dir / "nc.bin", &s);
        CHECK(back.address_table == c.address_table);
        CHECK(back.cache_array == c.cache_array);
        CHECK(s.bytes_read == std::filesystem::file_size(dir / "nc.bin"));
    }
    SECTION("empty cache round-trips") {
        NeighborCache c;
        c.address_table.assign(5, -1);
        TempDir dir;
        persist_neighbor_cache(c, dir / "nc.bin");
        NeighborCache back = load_neighbor_cache(dir / "nc.bin");
        CHECK(back.address_table == c.address_table);
        CHECK(back.cache_array.empty());
    }
    SECTION("lookup parity over 1000 random probes after reload") {
        gxtest::DiskGraph dg(400, 4000, 66);
        NeighborCache c = build_neighbor_cache(dg.file, 400 * 8 + 1500 * 8);
        TempDir dir;
        persist_neighbor_cache(c, dir / "nc.bin");
        NeighborCache back = load_neighbor_cache(dir / "nc.bin");
        SplitMix64 rng(9);
        for (int t = 0; t < 1000; ++t) {
            NodeId v = rng.bounded(400);
            auto a = c.lookup(v);
            auto b = back.lookup(v);
            REQUIRE(a.has_value() == b.has_value());
            if (a)
                REQUIRE(std::vector<NodeId>(a->begin(), a->end()) ==
                        std::vector<NodeId>(b->begin(), b->end()));
        }
    }
    SECTION("truncated file fails to load") {
        NeighborCache c;
        c.address_table.assign(50, -1);
        TempDir dir;
        persist_neighbor_cache(c, dir / "nc.bin");
        std::filesystem::resize_file(dir / "nc.bin",
                                     std::filesystem::file_size(dir / "nc.bin") - 9);
        CHECK_THROWS(load_neighbor_cache(dir / "nc.bin"));
    }
}

TEST_CASE("greedy admission leaves no fitting node uncached") {
    // Skip-and-continue: a node is only ever skipped because its region did
    // not fit the budget remaining at its turn. Since the budget shrinks
    // monotonically, no uncached node may fit the leftover budget at the end.
    gxtest::DiskGraph dg(120, 1000, 88);
    std::uint64_t budget = 120 * 8 + 300 * 8;
    NeighborCache c = build_neighbor_cache(dg.file, budget);
    std::uint64_t used = c.bytes_used();
    for (NodeId w = 0; w < 120; ++w) {
        if (c.lookup(w) || dg.mem.in_degree(w) == 0) continue;
        CHECK(used + (1 + dg.mem.in_degree(w)) * 8 > budget);
    }
}
