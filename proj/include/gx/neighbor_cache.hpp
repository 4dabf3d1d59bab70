#pragma once

// Static in-memory cache of in-neighbor lists, built offline and reloaded at
// each superbatch sample stage. Direct addressing: address_table has one entry
// per node in the graph; a non-negative entry is an index into cache_array,
// where a cached node's region is laid out as [count, neighbor_0, ...,
// neighbor_{count-1}]. Negative entry = miss.
//
// Admission is greedy by importance score = out_degree / in_degree (benefit
// proportional to how often a node is sampled, cost proportional to its list
// size), descending, ties broken by lower node id. A node whose region no
// longer fits the remaining byte budget is skipped and admission continues.

#include <cmath>
#include <optional>

#include "gx/graph_store.hpp"

namespace gx {

constexpr char kNeighborCacheMagic[8] = {'G', 'X', 'N', 'C', 'A', 'C', 'H', '1'};

struct NeighborCache {
    std::vector<std::int64_t> address_table;  // one entry per node; < 0 = miss
    std::vector<std::uint64_t> cache_array;   // packed [count, neighbors...] regions

    std::uint64_t num_nodes() const { return address_table.size(); }

    /// Hit: a view of the cached list, read via exactly three accesses
    /// (address_table, the count cell, the neighbor cells). Miss: nullopt.
    std::optional<std::span<const NodeId>> lookup(NodeId node) const {
        std::int64_t off = address_table[node];
        if (off < 0) return std::nullopt;
        std::uint64_t count = cache_array[static_cast<std::uint64_t>(off)];
        return std::span<const NodeId>(cache_array.data() + off + 1, count);
    }

    std::uint64_t cached_node_count() const {
        std::uint64_t n = 0;
        for (auto e : address_table)
            if (e >= 0) ++n;
        return n;
    }

    /// Byte footprint under the admission accounting: 8 bytes per address
    /// table entry plus 8 per cache_array cell.
    std::uint64_t bytes_used() const {
        return (address_table.size() + cache_array.size()) * 8;
    }
};

/// Importance score per node; nodes with in-degree 0 have nothing to cache
/// and are marked NaN (excluded from admission).
inline std::vector<double> score_nodes(std::span<const std::uint64_t> in_degrees,
                                       std::span<const std::uint64_t> out_degrees) {
    if (in_degrees.size() != out_degrees.size())
        throw std::invalid_argument("degree arrays must have equal length");
    std::vector<double> score(in_degrees.size());
    for (std::size_t v = 0; v < in_degrees.size(); ++v) {
        score[v] = in_degrees[v] == 0
                       ? std::numeric_limits<double>::quiet_NaN()
                       : static_cast<double>(out_degrees[v]) / static_cast<double>(in_degrees[v]);
    }
    return score;
}

inline std::vector<double> score_nodes(const GraphFile& graph, IoStats* stats = nullptr) {
    std::vector<std::uint64_t> in(graph.num_nodes());
    for (NodeId v = 0; v < graph.num_nodes(); ++v) in[v] = graph.in_degree(v);
    auto out = graph.compute_out_degrees(stats);
    return score_nodes(in, out);
}

/// Candidate order for admission: score descending, node id ascending;
/// excluded (NaN) nodes are dropped.
inline std::vector<NodeId> admission_order(std::span<const double> scores) {
    std::vector<NodeId> order;
    order.reserve(scores.size());
    for (NodeId v = 0; v < scores.size(); ++v)
        if (!std::isnan(scores[v])) order.push_back(v);
    std::sort(order.begin(), order.end(), [&](NodeId x, NodeId y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return x < y;
    });
    return order;
}

/// Builds the cache from the on-disk graph within `budget_bytes` total
/// (address table + admitted regions). The preprocessing reads go through
/// `stats` when provided.
inline NeighborCache build_neighbor_cache(const GraphFile& graph, std::uint64_t budget_bytes,
                                          IoStats* stats = nullptr) {
    const std::uint64_t table_bytes = graph.num_nodes() * 8;
    if (budget_bytes < table_bytes)
        throw std::invalid_argument("neighbor cache budget is smaller than the address table");

    IoStats local;
    IoStats& s = stats ? *stats : local;
    auto scores = score_nodes(graph, &s);
    auto order = admission_order(scores);

    NeighborCache cache;
    cache.address_table.assign(graph.num_nodes(), -1);
    std::uint64_t used = table_bytes;
    std::vector<NodeId> list;
    for (NodeId v : order) {
        const std::uint64_t region_bytes = (1 + graph.in_degree(v)) * 8;
        if (used + region_bytes > budget_bytes) continue;  // skip, keep scanning
        graph.read_in_neighbors(v, list, s);
        cache.address_table[v] = static_cast<std::int64_t>(cache.cache_array.size());
        cache.cache_array.push_back(list.size());
        cache.cache_array.insert(cache.cache_array.end(), list.begin(), list.end());
        used += region_bytes;
    }
    return cache;
}

inline void persist_neighbor_cache(const NeighborCache& cache, const std::filesystem::path& path) {
    BinWriter w(path);
    w.magic(kNeighborCacheMagic);
    w.u32(kFormatVersion);
    w.u64(cache.address_table.size());
    w.u64(cache.cache_array.size());
    w.i64_array(cache.address_table);
    w.u64_array(cache.cache_array);
    w.close();
}

/// Bulk sequential load; byte volume lands in `stats` when provided.
inline NeighborCache load_neighbor_cache(const std::filesystem::path& path,
                                         IoStats* stats = nullptr) {
    BinReader r(path);
    r.expect_magic(kNeighborCacheMagic);
    std::uint32_t ver = r.u32();
    if (ver != kFormatVersion)
        throw std::runtime_error("unsupported neighbor cache version: " + std::to_string(ver));
    NeighborCache cache;
    std::uint64_t nodes = r.u64();
    std::uint64_t cells = r.u64();
    cache.address_table = r.i64_array(nodes);
    cache.cache_array = r.u64_array(cells);
    if (stats) {
        std::uint64_t bytes = std::filesystem::file_size(path);
        stats->bytes_read += bytes;
        stats->pages_read += pages_touched(0, bytes);
    }
    return cache;
}

} // namespace gx
