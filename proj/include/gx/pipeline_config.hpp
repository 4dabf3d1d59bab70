#pragma once

// Run configuration for the training pipeline. Populated from a JSON config
// file and/or CLI flags by the tool layer; everything that affects results is
// in here, so a run is a pure function of this struct.

#include "gx/sampler.hpp"

namespace gx {

struct RunConfig {
    std::filesystem::path graph_path;
    std::filesystem::path feature_path;
    std::filesystem::path neighbor_cache_path;
    std::filesystem::path runtime_dir = "runtime";

    Fanouts fanouts{10, 10, 10};
    std::uint64_t batch_size = 512;
    std::uint64_t superbatch_size = 64;
    std::uint64_t epochs = 1;
    std::uint64_t feature_cache_entries = 0;
    unsigned sampler_workers = 1;
    std::uint64_t seed = 1;

    // Training set: explicit ids win; otherwise a seeded random fraction of
    // all nodes is drawn.
    std::vector<NodeId> train_ids;
    double train_fraction = 0.1;

    bool overlap = true;
    bool use_neighbor_cache = true;
    bool keep_neighbor_cache_resident = false;

    void validate() const {
        if (superbatch_size < 1) throw std::invalid_argument("superbatch_size must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (fanouts.empty()) throw std::invalid_argument("fanouts must not be empty");
        for (auto f : fanouts)
            if (f < 1) throw std::invalid_argument("fanout entries must be >= 1");
        if (train_ids.empty() && (train_fraction <= 0.0 || train_fraction > 1.0))
            throw std::invalid_argument("train_fraction must be in (0, 1]");
        if (use_neighbor_cache && neighbor_cache_path.empty())
            throw std::invalid_argument("neighbor cache path is required");
    }
};

} // namespace gx
