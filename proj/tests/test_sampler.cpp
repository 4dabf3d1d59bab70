#include "testutil.hpp"

#include <fstream>

#include "gx/sampler.hpp"

using namespace gx;
using gxtest::TempDir;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool sample_outputs_equal(const SampleOutput& a, const SampleOutput& b) {
    return a.ids == b.ids && a.num_seeds == b.num_seeds && a.layers == b.layers;
}

} // namespace

TEST_CASE("plan_seed_batches shuffles deterministically and partitions") {
    std::vector<NodeId> train(10);
    for (NodeId v = 0; v < 10; ++v) train[v] = v;

    SECTION("batch sizing 4,4,2") {
        SeedPlan p = plan_seed_batches(train, 4, 1);
        REQUIRE(p.batches.size() == 3);
        CHECK(p.batches[0].size() == 4);
        CHECK(p.batches[1].size() == 4);
        CHECK(p.batches[2].size() == 2);
        std::vector<NodeId> all;
        for (auto& b : p.batches) all.insert(all.end(), b.begin(), b.end());
        std::sort(all.begin(), all.end());
        CHECK(all == train);
    }
    SECTION("same seed, same plan") {
        CHECK(plan_seed_batches(train, 3, 42).batches == plan_seed_batches(train, 3, 42).batches);
    }
    SECTION("different seeds differ on 100+ ids") {
        std::vector<NodeId> big(200);
        for (NodeId v = 0; v < 200; ++v) big[v] = v;
        CHECK(plan_seed_batches(big, 16, 1).batches != plan_seed_batches(big, 16, 2).batches);
    }
    SECTION("rejects empty training set and zero batch size") {
        CHECK_THROWS_AS(plan_seed_batches({}, 4, 1), std::invalid_argument);
        CHECK_THROWS_AS(plan_seed_batches(train, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("sample_batch expansion semantics") {
    SECTION("fanout above degree takes every neighbor") {
        // Node 0 has exactly two in-neighbors; fanout 3 must take both.
        TempDir dir;
        persist_graph(build_csc(std::vector<std::pair<NodeId, NodeId>>{{1, 0}, {2, 0}}, 3),
                      dir / "g.bin");
        GraphFile g = GraphFile::open(dir / "g.bin");
        IoStats s;
        std::vector<NodeId> seeds{0};
        SampleOutput out = sample_batch(g, nullptr, seeds, {3}, 9, s);
        REQUIRE(out.layers.size() == 1);
        CHECK(out.layers[0].size() == 2);
        std::vector<NodeId> sampled;
        for (auto& [src, dst] : out.layers[0]) {
            CHECK(dst == 0);
            sampled.push_back(out.ids[src]);
        }
        std::sort(sampled.begin(), sampled.end());
        CHECK(sampled == std::vector<NodeId>{1, 2});
    }
    SECTION("edgeless graph yields only seeds") {
        TempDir dir;
        persist_graph(build_csc({}, 5), dir / "g.bin");
        GraphFile g = GraphFile::open(dir / "g.bin");
        IoStats s;
        std::vector<NodeId> seeds{3, 1};
        SampleOutput out = sample_batch(g, nullptr, seeds, {4, 4}, 1, s);
        CHECK(out.ids == seeds);
        for (auto& layer : out.layers) CHECK(layer.empty());
    }
    SECTION("seed out of range") {
        TempDir dir;
        persist_graph(build_csc({}, 2), dir / "g.bin");
        GraphFile g = GraphFile::open(dir / "g.bin");
        IoStats s;
        std::vector<NodeId> seeds{7};
        CHECK_THROWS_AS(sample_batch(g, nullptr, seeds, {2}, 1, s), std::out_of_range);
    }
}

TEST_CASE("sampling caps, membership and dedup invariants") {
    gxtest::DiskGraph dg(300, 3000, 5);
    IoStats s;
    SplitMix64 rng(17);
    Fanouts fanouts{4, 3};
    for (int t = 0; t < 10; ++t) {
        std::vector<NodeId> seeds;
        std::set<NodeId> used;
        while (seeds.size() < 8) {
            NodeId v = rng.bounded(300);
            if (used.insert(v).second) seeds.push_back(v);
        }
        SampleOutput out = sample_batch(dg.file, nullptr, seeds, fanouts, 100 + t, s);

        // Seeds form the prefix and ids are distinct.
        REQUIRE(out.num_seeds == seeds.size());
        CHECK(std::equal(seeds.begin(), seeds.end(), out.ids.begin()));
        std::set<NodeId> uniq(out.ids.begin(), out.ids.end());
        CHECK(uniq.size() == out.ids.size());

        // Per node and layer: count = min(fanout, in_degree), sampled
        // children are distinct true in-neighbors.
        std::set<std::uint32_t> reachable;
        for (std::uint32_t k = 0; k < out.num_seeds; ++k) reachable.insert(k);
        for (std::size_t l = 0; l < fanouts.size(); ++l) {
            std::map<std::uint32_t, std::set<NodeId>> sampled;
            for (auto& [src, dst] : out.layers[l]) {
                REQUIRE(src < out.ids.size());
                REQUIRE(dst < out.ids.size());
                auto nbrs = dg.mem.in_neighbors(out.ids[dst]);
                CHECK(std::binary_search(nbrs.begin(), nbrs.end(), out.ids[src]));
                CHECK(sampled[dst].insert(out.ids[src]).second);  // no duplicate draw
                reachable.insert(src);
            }
            for (auto& [dst, children] : sampled) {
                std::uint64_t deg = dg.mem.in_degree(out.ids[dst]);
                CHECK(children.size() == std::min<std::uint64_t>(fanouts[l], deg));
            }
        }
        // Every id is a seed or reachable through sampled edges.
        CHECK(reachable.size() == out.ids.size());
    }
}

TEST_CASE("neighbor cache transparency: identical outputs, fewer reads") {
    gxtest::DiskGraph dg(200, 2400, 6);
    NeighborCache cache = build_neighbor_cache(dg.file, 200 * 8 + 1200 * 8);
    REQUIRE(cache.cached_node_count() > 0);

    std::vector<NodeId> seeds{1, 7, 42, 99};
    Fanouts fanouts{5, 5};
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        IoStats with_cache, without_cache;
        SampleOutput a = sample_batch(dg.file, &cache, seeds, fanouts, seed, with_cache);
        SampleOutput b = sample_batch(dg.file, nullptr, seeds, fanouts, seed, without_cache);
        CHECK(sample_outputs_equal(a, b));
        CHECK(with_cache.neighbor_lists_read < without_cache.neighbor_lists_read);
    }
}

TEST_CASE("ids and adj files round-trip") {
    TempDir dir;
    std::vector<NodeId> ids{5, 1, 9, 1000000007};
    write_ids_file(dir / "ids.bin", ids);
    CHECK(read_ids_file(dir / "ids.bin") == ids);

    std::vector<std::vector<LocalEdge>> layers{{{0, 1}, {2, 3}}, {}, {{7, 0}}};
    write_adj_file(dir / "adj.bin", layers);
    CHECK(read_adj_file(dir / "adj.bin") == layers);

    SECTION("wrong magic is rejected") {
        write_ids_file(dir / "x.bin", ids);
        CHECK_THROWS(read_adj_file(dir / "x.bin"));
    }
}

TEST_CASE("superbatch sample stage writes 2S files, worker-count invariant") {
    gxtest::DiskGraph dg(300, 3600, 44);
    NeighborCache cache = build_neighbor_cache(dg.file, 300 * 8 + 500 * 8);

    std::vector<NodeId> train(120);
    for (NodeId v = 0; v < 120; ++v) train[v] = v;
    SeedPlan plan = plan_seed_batches(train, 30, 3);
    REQUIRE(plan.batches.size() == 4);

    TempDir out1, out4;
    auto r1 = superbatch_sample(dg.file, &cache, plan.batches, {4, 4}, 123, 0, 7,
                                out1.path(), 1);
    auto r4 = superbatch_sample(dg.file, &cache, plan.batches, {4, 4}, 123, 0, 7,
                                out4.path(), 4);
    CHECK(r1.files_written == 8);
    CHECK(r4.files_written == 8);
    CHECK(r1.io.neighbor_lists_read == r4.io.neighbor_lists_read);
    CHECK(r1.io.pages_read == r4.io.pages_read);

    for (std::uint64_t i = 0; i < 4; ++i) {
        CHECK(file_bytes(ids_file_path(out1.path(), 7, i)) ==
              file_bytes(ids_file_path(out4.path(), 7, i)));
        CHECK(file_bytes(adj_file_path(out1.path(), 7, i)) ==
              file_bytes(adj_file_path(out4.path(), 7, i)));
    }

    SECTION("remainder superbatch of 2 batches writes 4 files") {
        TempDir out;
        auto slice = std::span<const std::vector<NodeId>>(plan.batches).subspan(0, 2);
        auto r = superbatch_sample(dg.file, &cache, slice, {4, 4}, 123, 0, 9, out.path(), 2);
        CHECK(r.files_written == 4);
        std::size_t files = 0;
        for (auto& e : std::filesystem::directory_iterator(out.path())) {
            (void)e;
            ++files;
        }
        CHECK(files == 4);
    }
}
