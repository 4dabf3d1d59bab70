#pragma once

// On-disk storage of the CSC adjacency structure and the fixed-width feature
// table. Reads are accounted at 4KB-page granularity against a block-device
// model: neighbor lists and feature rows are charged the distinct pages their
// bytes occupy, with no coalescing across independent random reads.
//
// File formats (little-endian, byte-exact spec in docs/FORMATS.md):
//   graph.bin    magic "GXGRAPH1", version, num_nodes, num_edges,
//                indices_offset, indptr[num_nodes+1], pad, indices[num_edges]
//   features.bin magic "GXFEAT01", version, num_nodes, dim, scalar_width,
//                payload_offset, pad, rows packed back to back
//
// The indptr array is memory-resident after open; the indices array and the
// feature payload stay on disk and are fetched with positional reads.

#include <algorithm>
#include <cassert>
#include <utility>

#include "gx/common.hpp"

namespace gx {

constexpr char kGraphMagic[8] = {'G', 'X', 'G', 'R', 'A', 'P', 'H', '1'};
constexpr char kFeatMagic[8] = {'G', 'X', 'F', 'E', 'A', 'T', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// In-memory CSC graph
// ---------------------------------------------------------------------------

struct CscGraph {
    std::uint64_t num_nodes = 0;
    std::vector<std::uint64_t> indptr;  // num_nodes + 1 entries, element indices
    std::vector<NodeId> indices;        // in-neighbors, grouped per node, sorted

    std::span<const NodeId> in_neighbors(NodeId v) const {
        return {indices.data() + indptr[v], indices.data() + indptr[v + 1]};
    }
    std::uint64_t in_degree(NodeId v) const { return indptr[v + 1] - indptr[v]; }
    std::uint64_t num_edges() const { return indices.size(); }

    std::vector<std::uint64_t> out_degrees() const {
        std::vector<std::uint64_t> deg(num_nodes, 0);
        for (NodeId src : indices) deg[src]++;
        return deg;
    }
};

/// Builds the CSC structure from (src, dst) edge pairs: for every node v the
/// in-neighbor list is {src | (src,v) in edges}, deduplicated and sorted.
inline CscGraph build_csc(std::span<const std::pair<NodeId, NodeId>> edges,
                          std::uint64_t num_nodes) {
    for (const auto& [s, d] : edges) {
        if (s >= num_nodes || d >= num_nodes)
            throw std::out_of_range("build_csc: edge endpoint out of range");
    }
    std::vector<std::uint64_t> count(num_nodes + 1, 0);
    for (const auto& e : edges) count[e.second + 1]++;
    std::vector<std::uint64_t> cursor(num_nodes + 1, 0);
    for (std::uint64_t v = 0; v < num_nodes; ++v) cursor[v + 1] = cursor[v] + count[v + 1];

    std::vector<NodeId> raw(edges.size());
    std::vector<std::uint64_t> next(cursor.begin(), cursor.end() - 1);
    for (const auto& [s, d] : edges) raw[next[d]++] = s;

    CscGraph g;
    g.num_nodes = num_nodes;
    g.indptr.assign(num_nodes + 1, 0);
    g.indices.reserve(raw.size());
    for (std::uint64_t v = 0; v < num_nodes; ++v) {
        auto first = raw.begin() + static_cast<std::ptrdiff_t>(cursor[v]);
        auto last = raw.begin() + static_cast<std::ptrdiff_t>(cursor[v + 1]);
        std::sort(first, last);
        auto end = std::unique(first, last);
        g.indices.insert(g.indices.end(), first, end);
        g.indptr[v + 1] = g.indices.size();
    }
    return g;
}

inline void persist_graph(const CscGraph& g, const std::filesystem::path& path) {
    BinWriter w(path);
    w.magic(kGraphMagic);
    w.u32(kFormatVersion);
    w.u64(g.num_nodes);
    w.u64(g.indices.size());
    const std::uint64_t header_bytes = 8 + 4 + 8 + 8 + 8;
    const std::uint64_t indptr_bytes = (g.num_nodes + 1) * 8;
    std::uint64_t indices_offset = header_bytes + indptr_bytes;
    indices_offset = (indices_offset + kPageSize - 1) / kPageSize * kPageSize;
    w.u64(indices_offset);
    w.u64_array(g.indptr);
    w.pad_to(kPageSize);
    w.u64_array(g.indices);
    w.close();
}

// ---------------------------------------------------------------------------
// Disk-backed graph handle
// ---------------------------------------------------------------------------

/// Open graph file: indptr held in memory, indices read on demand with page
/// accounting. Safe for concurrent readers, each with its own IoStats.
class GraphFile {
public:
    static GraphFile open(const std::filesystem::path& path) {
        GraphFile g;
        {
            // Header + indptr only; the indices payload stays on disk.
            constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8 + 8;
            BinReader probe(path, kHeaderBytes);
            probe.expect_magic(kGraphMagic);
            probe.u32();
            std::uint64_t nodes = probe.u64();
            BinReader r(path, kHeaderBytes + (nodes + 1) * 8);
            r.expect_magic(kGraphMagic);
            std::uint32_t ver = r.u32();
            if (ver != kFormatVersion)
                throw std::runtime_error("unsupported graph version: " + std::to_string(ver));
            g.num_nodes_ = r.u64();
            g.num_edges_ = r.u64();
            g.indices_offset_ = r.u64();
            g.indptr_ = r.u64_array(g.num_nodes_ + 1);
        }
        if (g.indptr_.front() != 0 || g.indptr_.back() != g.num_edges_)
            throw std::runtime_error("graph file indptr is inconsistent: " + path.string());
        g.file_ = PreadFile(path);
        if (g.file_.size() < g.indices_offset_ + g.num_edges_ * 8)
            throw std::runtime_error("truncated graph file: " + path.string());
        return g;
    }

    std::uint64_t num_nodes() const { return num_nodes_; }
    std::uint64_t num_edges() const { return num_edges_; }
    const std::vector<std::uint64_t>& indptr() const { return indptr_; }
    std::uint64_t in_degree(NodeId v) const {
        check_node(v);
        return indptr_[v + 1] - indptr_[v];
    }

    /// Reads node v's in-neighbor list from disk. Charges one neighbor-list
    /// read plus the distinct pages covering the list's bytes.
    void read_in_neighbors(NodeId v, std::vector<NodeId>& out, IoStats& stats) const {
        check_node(v);
        const std::uint64_t lo = indptr_[v] * 8;
        const std::uint64_t hi = indptr_[v + 1] * 8;
        out.resize((hi - lo) / 8);
        if (hi > lo) file_.read_at(out.data(), hi - lo, indices_offset_ + lo);
        stats.neighbor_lists_read += 1;
        stats.pages_read += pages_touched(lo, hi);
        stats.bytes_read += hi - lo;
    }

    std::vector<NodeId> read_in_neighbors(NodeId v, IoStats& stats) const {
        std::vector<NodeId> out;
        read_in_neighbors(v, out, stats);
        return out;
    }

    /// Streams the whole indices array once to count how many times each node
    /// occurs as a source, i.e. its out-degree.
    std::vector<std::uint64_t> compute_out_degrees(IoStats* stats = nullptr) const {
        std::vector<std::uint64_t> deg(num_nodes_, 0);
        constexpr std::size_t kChunk = 1 << 16;  // ids per read
        std::vector<NodeId> buf;
        std::uint64_t done = 0;
        while (done < num_edges_) {
            std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, num_edges_ - done));
            buf.resize(n);
            file_.read_at(buf.data(), n * 8, indices_offset_ + done * 8);
            for (NodeId src : buf) {
                if (src >= num_nodes_)
                    throw std::runtime_error("graph file contains out-of-range neighbor id");
                deg[src]++;
            }
            done += n;
        }
        if (stats) {
            stats->bytes_read += num_edges_ * 8;
            stats->pages_read += pages_touched(0, num_edges_ * 8);
        }
        return deg;
    }

private:
    void check_node(NodeId v) const {
        if (v >= num_nodes_) throw std::out_of_range("node id out of range");
    }

    std::uint64_t num_nodes_ = 0;
    std::uint64_t num_edges_ = 0;
    std::uint64_t indices_offset_ = 0;
    std::vector<std::uint64_t> indptr_;
    PreadFile file_;
};

inline GraphFile open_graph(const std::filesystem::path& path) { return GraphFile::open(path); }

/// Reads a whole graph file back into memory (round-trips persist_graph).
inline CscGraph load_graph(const std::filesystem::path& path) {
    GraphFile f = GraphFile::open(path);
    CscGraph g;
    g.num_nodes = f.num_nodes();
    g.indptr = f.indptr();
    g.indices.resize(f.num_edges());
    IoStats scratch;
    std::vector<NodeId> list;
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        f.read_in_neighbors(v, list, scratch);
        std::copy(list.begin(), list.end(), g.indices.begin() + static_cast<std::ptrdiff_t>(g.indptr[v]));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Feature table
// ---------------------------------------------------------------------------

/// Dense row-major matrix used for gathered batch features.
struct RowMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    void resize(std::size_t r, std::size_t d) {
        rows = r;
        dim = d;
        data.resize(r * d);
    }
    std::span<float> row(std::size_t k) { return {data.data() + k * dim, dim}; }
    std::span<const float> row(std::size_t k) const { return {data.data() + k * dim, dim}; }
};

/// Streaming writer for features.bin; rows are appended in node-id order.
class FeatureWriter {
public:
    FeatureWriter(const std::filesystem::path& path, std::uint64_t num_nodes, std::uint32_t dim)
        : w_(path), num_nodes_(num_nodes), dim_(dim) {
        w_.magic(kFeatMagic);
        w_.u32(kFormatVersion);
        w_.u64(num_nodes);
        w_.u32(dim);
        w_.u32(sizeof(float));
        const std::uint64_t header_bytes = 8 + 4 + 8 + 4 + 4 + 8;
        std::uint64_t payload = (header_bytes + kPageSize - 1) / kPageSize * kPageSize;
        w_.u64(payload);
        w_.pad_to(kPageSize);
    }

    void append_row(std::span<const float> row) {
        if (row.size() != dim_) throw std::invalid_argument("feature row has wrong dimension");
        w_.f32_array(row);
        ++written_;
    }

    void close() {
        if (written_ != num_nodes_)
            throw std::logic_error("feature writer closed before all rows were written");
        w_.close();
    }

private:
    BinWriter w_;
    std::uint64_t num_nodes_;
    std::uint32_t dim_;
    std::uint64_t written_ = 0;
};

inline void write_features(const std::filesystem::path& path, const RowMatrix& m) {
    FeatureWriter w(path, m.rows, static_cast<std::uint32_t>(m.dim));
    for (std::size_t i = 0; i < m.rows; ++i) w.append_row(m.row(i));
    w.close();
}

/// Open feature file handle. Row i occupies bytes [i*row_bytes, (i+1)*row_bytes)
/// of the page-aligned payload region; every row read is charged the distinct
/// pages it covers, independently per row.
class FeatureFile {
public:
    static FeatureFile open(const std::filesystem::path& path) {
        FeatureFile f;
        {
            BinReader r(path, 8 + 4 + 8 + 4 + 4 + 8);  // header only
            r.expect_magic(kFeatMagic);
            std::uint32_t ver = r.u32();
            if (ver != kFormatVersion)
                throw std::runtime_error("unsupported feature version: " + std::to_string(ver));
            f.num_nodes_ = r.u64();
            f.dim_ = r.u32();
            f.scalar_width_ = r.u32();
            f.payload_offset_ = r.u64();
        }
        if (f.scalar_width_ != sizeof(float))
            throw std::runtime_error("unsupported scalar width in " + path.string());
        f.row_bytes_ = static_cast<std::uint64_t>(f.dim_) * f.scalar_width_;
        f.file_ = PreadFile(path);
        if (f.file_.size() < f.payload_offset_ + f.num_nodes_ * f.row_bytes_)
            throw std::runtime_error("truncated feature file: " + path.string());
        return f;
    }

    std::uint64_t num_nodes() const { return num_nodes_; }
    std::uint32_t dim() const { return dim_; }
    std::uint64_t row_bytes() const { return row_bytes_; }

    void read_row(NodeId id, std::span<float> out, IoStats& stats) const {
        if (id >= num_nodes_) throw std::out_of_range("feature row id out of range");
        if (out.size() != dim_) throw std::invalid_argument("output row has wrong dimension");
        file_.read_at(out.data(), row_bytes_, payload_offset_ + id * row_bytes_);
        stats.rows_read += 1;
        stats.pages_read += page_count_for_row(row_bytes_, id);
        stats.bytes_read += row_bytes_;
    }

    /// Gathers the given rows in order into a fresh matrix (order preserved,
    /// duplicates allowed). Each row is charged its own pages.
    RowMatrix read_rows(std::span<const NodeId> ids, IoStats& stats) const {
        RowMatrix m;
        m.resize(ids.size(), dim_);
        for (std::size_t k = 0; k < ids.size(); ++k) read_row(ids[k], m.row(k), stats);
        return m;
    }

private:
    std::uint64_t num_nodes_ = 0;
    std::uint32_t dim_ = 0;
    std::uint32_t scalar_width_ = 0;
    std::uint64_t payload_offset_ = 0;
    std::uint64_t row_bytes_ = 0;
    PreadFile file_;
};

inline FeatureFile open_features(const std::filesystem::path& path) {
    return FeatureFile::open(path);
}

} // namespace gx
