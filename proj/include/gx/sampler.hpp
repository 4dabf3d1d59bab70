#pragma once

// Multi-layer uniform neighborhood sampling and the superbatch sample stage.
//
// sample_batch expands the accumulated node set layer by layer (GraphSAGE
// semantics): at layer l every node discovered so far draws up to fanouts[l]
// distinct in-neighbors without replacement, via a partial Fisher-Yates
// shuffle of its neighbor list. Neighbor lists come from the static neighbor
// cache on a hit and from disk otherwise; the two paths yield bit-identical
// sampling because the cached list equals the stored list.
//
// The superbatch stage runs one sampling job per batch on a small worker pool
// and writes two runtime files per batch:
//   ids_{sb}_{i}.bin  magic "GXIDS001": count u64, node ids u64 LE
//   adj_{sb}_{i}.bin  magic "GXADJ001": layer count u32, then per layer an
//                     edge count u64 followed by (src u32, dst u32) local pairs
// Each batch is seeded from (global seed, global batch index) only, so output
// bytes do not depend on the worker count or scheduling order.

#include <atomic>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "gx/graph_store.hpp"
#include "gx/neighbor_cache.hpp"

namespace gx {

constexpr char kIdsMagic[8] = {'G', 'X', 'I', 'D', 'S', '0', '0', '1'};
constexpr char kAdjMagic[8] = {'G', 'X', 'A', 'D', 'J', '0', '0', '1'};

using Fanouts = std::vector<std::uint32_t>;
using LocalEdge = std::pair<std::uint32_t, std::uint32_t>;  // (src_local, dst_local)

struct SampleOutput {
    std::vector<NodeId> ids;  // deduplicated; seeds form the prefix
    std::size_t num_seeds = 0;
    std::vector<std::vector<LocalEdge>> layers;  // sampled edges per layer
};

struct SeedPlan {
    std::vector<std::vector<NodeId>> batches;
};

/// Deterministic shuffle of the training set, split into batches of
/// batch_size (last batch may be short).
inline SeedPlan plan_seed_batches(std::span<const NodeId> train_ids, std::size_t batch_size,
                                  std::uint64_t epoch_seed) {
    if (train_ids.empty()) throw std::invalid_argument("training set is empty");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<NodeId> shuffled(train_ids.begin(), train_ids.end());
    SplitMix64 rng(epoch_seed);
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }
    SeedPlan plan;
    for (std::size_t off = 0; off < shuffled.size(); off += batch_size) {
        std::size_t end = std::min(off + batch_size, shuffled.size());
        plan.batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(off),
                                  shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

/// Samples the computational graph for one batch. Fully determined by
/// batch_seed; the neighbor cache only affects IoStats, never the output.
inline SampleOutput sample_batch(const GraphFile& graph, const NeighborCache* cache,
                                 std::span<const NodeId> seeds, const Fanouts& fanouts,
                                 std::uint64_t batch_seed, IoStats& stats) {
    if (seeds.empty()) throw std::invalid_argument("sample_batch: seeds are empty");

    SampleOutput out;
    out.num_seeds = seeds.size();
    out.layers.resize(fanouts.size());

    std::unordered_map<NodeId, std::uint32_t> local;
    local.reserve(seeds.size() * 4);
    for (NodeId s : seeds) {
        if (s >= graph.num_nodes()) throw std::out_of_range("seed node out of range");
        if (!local.emplace(s, static_cast<std::uint32_t>(out.ids.size())).second)
            throw std::invalid_argument("duplicate seed in batch");
        out.ids.push_back(s);
    }

    SplitMix64 rng(batch_seed);
    std::vector<NodeId> scratch;
    for (std::size_t l = 0; l < fanouts.size(); ++l) {
        const std::size_t frontier = out.ids.size();
        auto& edges = out.layers[l];
        for (std::size_t k = 0; k < frontier; ++k) {
            const NodeId parent = out.ids[k];
            if (cache) {
                if (auto hit = cache->lookup(parent)) {
                    scratch.assign(hit->begin(), hit->end());
                } else {
                    graph.read_in_neighbors(parent, scratch, stats);
                }
            } else {
                graph.read_in_neighbors(parent, scratch, stats);
            }
            const std::size_t take =
                std::min<std::size_t>(fanouts[l], scratch.size());
            for (std::size_t j = 0; j < take; ++j) {
                std::size_t pick = j + static_cast<std::size_t>(rng.bounded(scratch.size() - j));
                std::swap(scratch[j], scratch[pick]);
                const NodeId child = scratch[j];
                auto [it, inserted] =
                    local.emplace(child, static_cast<std::uint32_t>(out.ids.size()));
                if (inserted) out.ids.push_back(child);
                edges.push_back({it->second, static_cast<std::uint32_t>(k)});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runtime files
// ---------------------------------------------------------------------------

inline std::filesystem::path ids_file_path(const std::filesystem::path& dir, std::uint64_t sb,
                                           std::uint64_t i) {
    return dir / ("ids_" + std::to_string(sb) + "_" + std::to_string(i) + ".bin");
}
inline std::filesystem::path adj_file_path(const std::filesystem::path& dir, std::uint64_t sb,
                                           std::uint64_t i) {
    return dir / ("adj_" + std::to_string(sb) + "_" + std::to_string(i) + ".bin");
}

inline void write_ids_file(const std::filesystem::path& path, std::span<const NodeId> ids) {
    BinWriter w(path);
    w.magic(kIdsMagic);
    w.u64(ids.size());
    w.u64_array(ids);
    w.close();
}

inline std::vector<NodeId> read_ids_file(const std::filesystem::path& path) {
    BinReader r(path);
    r.expect_magic(kIdsMagic);
    std::uint64_t n = r.u64();
    return r.u64_array(n);
}

inline void write_adj_file(const std::filesystem::path& path,
                           const std::vector<std::vector<LocalEdge>>& layers) {
    BinWriter w(path);
    w.magic(kAdjMagic);
    w.u32(static_cast<std::uint32_t>(layers.size()));
    std::string buf;
    for (const auto& edges : layers) {
        w.u64(edges.size());
        buf.clear();
        buf.reserve(edges.size() * 8);
        for (const auto& [src, dst] : edges) {
            detail::put_u32(buf, src);
            detail::put_u32(buf, dst);
        }
        w.raw(buf.data(), buf.size());
    }
    w.close();
}

inline std::vector<std::vector<LocalEdge>> read_adj_file(const std::filesystem::path& path) {
    BinReader r(path);
    r.expect_magic(kAdjMagic);
    std::uint32_t layers = r.u32();
    std::vector<std::vector<LocalEdge>> out(layers);
    for (auto& edges : out) {
        std::uint64_t n = r.u64();
        r.need(n * 8);
        edges.resize(n);
        auto words = r.u64_array(n);
        for (std::size_t i = 0; i < n; ++i) {
            edges[i].first = static_cast<std::uint32_t>(words[i] & 0xFFFFFFFFULL);
            edges[i].second = static_cast<std::uint32_t>(words[i] >> 32);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Superbatch sample stage
// ---------------------------------------------------------------------------

struct SuperbatchSampleResult {
    IoStats io;                      // merged over workers
    std::uint64_t files_written = 0; // 2 per batch
    std::uint64_t batches = 0;
};

/// Samples every batch of the slice and writes its ids/adj files. batch i of
/// the slice is seeded with derive_seed(global_seed, first_global_batch + i),
/// so any worker count yields byte-identical files.
inline SuperbatchSampleResult superbatch_sample(
    const GraphFile& graph, const NeighborCache* cache,
    std::span<const std::vector<NodeId>> batch_slice, const Fanouts& fanouts,
    std::uint64_t global_seed, std::uint64_t first_global_batch, std::uint64_t sb_index,
    const std::filesystem::path& out_dir, unsigned workers) {
    if (workers < 1) workers = 1;
    std::filesystem::create_directories(out_dir);

    std::vector<IoStats> worker_stats(workers);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mu;

    auto run = [&](unsigned w) {
        try {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= batch_slice.size() || failed.load()) break;
                std::uint64_t seed = derive_seed(global_seed, first_global_batch + i);
                SampleOutput s =
                    sample_batch(graph, cache, batch_slice[i], fanouts, seed, worker_stats[w]);
                write_ids_file(ids_file_path(out_dir, sb_index, i), s.ids);
                write_adj_file(adj_file_path(out_dir, sb_index, i), s.layers);
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lk(error_mu);
            failed.store(true);
            if (error_msg.empty()) error_msg = e.what();
        }
    };

    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error("superbatch sample failed: " + error_msg);

    SuperbatchSampleResult r;
    for (auto& s : worker_stats) r.io += s;
    r.batches = batch_slice.size();
    r.files_written = 2 * batch_slice.size();
    return r;
}

} // namespace gx
