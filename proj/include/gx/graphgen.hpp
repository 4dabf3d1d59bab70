#pragma once

// Synthetic dataset generation: a recursive-quadrant (RMAT-style) edge
// generator with heavy-tailed degrees, plus seeded pseudo-random features.
// Everything is a pure function of the spec's seeds, so generated datasets
// are reproducible byte for byte.

#include "gx/graph_store.hpp"

namespace gx {

struct GenSpec {
    std::uint64_t num_nodes = 0;
    double avg_degree = 16.0;
    // Quadrant probabilities for the recursive generator; must sum to 1.
    double a = 0.57, b = 0.19, c = 0.19, d = 0.05;
    std::uint32_t dim = 256;
    std::uint64_t edge_seed = 1;
    std::uint64_t value_seed = 2;

    void validate() const {
        if (num_nodes < 1) throw std::invalid_argument("num_nodes must be >= 1");
        if (avg_degree < 0) throw std::invalid_argument("avg_degree must be >= 0");
        if (dim < 1) throw std::invalid_argument("dim must be >= 1");
        double s = a + b + c + d;
        if (s < 0.999 || s > 1.001)
            throw std::invalid_argument("quadrant probabilities must sum to 1");
    }
};

/// One RMAT edge: descend scale levels, picking a quadrant per level.
inline std::pair<NodeId, NodeId> rmat_edge(SplitMix64& rng, unsigned scale, const GenSpec& s) {
    NodeId src = 0, dst = 0;
    for (unsigned level = 0; level < scale; ++level) {
        // 53-bit uniform double in [0,1)
        double r = static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
        src <<= 1;
        dst <<= 1;
        if (r < s.a) {
        } else if (r < s.a + s.b) {
            dst |= 1;
        } else if (r < s.a + s.b + s.c) {
            src |= 1;
        } else {
            src |= 1;
            dst |= 1;
        }
    }
    return {src, dst};
}

/// Generates floor(num_nodes * avg_degree) directed edges; endpoints falling
/// outside [0, num_nodes) are redrawn. Duplicates and self-loops are kept;
/// CSC construction deduplicates.
inline std::vector<std::pair<NodeId, NodeId>> generate_edges(const GenSpec& spec) {
    spec.validate();
    unsigned scale = 0;
    while ((std::uint64_t{1} << scale) < spec.num_nodes) ++scale;
    SplitMix64 rng(spec.edge_seed);
    const std::uint64_t target =
        static_cast<std::uint64_t>(spec.avg_degree * static_cast<double>(spec.num_nodes));
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(target);
    while (edges.size() < target) {
        auto e = rmat_edge(rng, scale, spec);
        if (e.first >= spec.num_nodes || e.second >= spec.num_nodes) continue;
        edges.push_back(e);
    }
    return edges;
}

/// Feature scalar for (node, column): reproducible without storing the table,
/// uniform in [0, 1).
inline float feature_value(std::uint64_t value_seed, NodeId node, std::uint32_t col) {
    std::uint64_t h = mix64(value_seed ^ mix64(node * 0x10001ULL + col));
    return static_cast<float>(h >> 40) * 0x1.0p-24f;
}

struct GenResult {
    std::uint64_t num_nodes = 0;
    std::uint64_t num_edges = 0;  // after dedup
    std::uint64_t graph_bytes = 0;
    std::uint64_t feature_bytes = 0;
};

/// Generates and persists graph.bin + features.bin under out_dir.
inline GenResult generate_dataset(const GenSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir);
    auto edges = generate_edges(spec);
    CscGraph g = build_csc(edges, spec.num_nodes);
    persist_graph(g, out_dir / "graph.bin");

    FeatureWriter fw(out_dir / "features.bin", spec.num_nodes, spec.dim);
    std::vector<float> row(spec.dim);
    for (NodeId v = 0; v < spec.num_nodes; ++v) {
        for (std::uint32_t j = 0; j < spec.dim; ++j) row[j] = feature_value(spec.value_seed, v, j);
        fw.append_row(row);
    }
    fw.close();

    GenResult r;
    r.num_nodes = spec.num_nodes;
    r.num_edges = g.num_edges();
    r.graph_bytes = std::filesystem::file_size(out_dir / "graph.bin");
    r.feature_bytes = std::filesystem::file_size(out_dir / "features.bin");
    return r;
}

} // namespace gx
