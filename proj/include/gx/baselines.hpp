#pragma once

// Reference cache policies evaluated over the same ids traces as the optimal
// feature cache: no cache, a static set of the highest out-degree nodes, and
// per-access LRU. Used to reproduce the miss-ratio ordering against the
// offline-optimal policy.

#include <list>

#include "gx/changeset.hpp"

namespace gx {

enum class CachePolicy { none, static_degree, lru, belady };

inline const char* policy_name(CachePolicy p) {
    switch (p) {
        case CachePolicy::none: return "none";
        case CachePolicy::static_degree: return "static_degree";
        case CachePolicy::lru: return "lru";
        case CachePolicy::belady: return "belady";
    }
    return "?";
}

inline CachePolicy parse_policy(const std::string& s) {
    if (s == "none") return CachePolicy::none;
    if (s == "static_degree") return CachePolicy::static_degree;
    if (s == "lru") return CachePolicy::lru;
    if (s == "belady") return CachePolicy::belady;
    throw std::invalid_argument("unknown policy: " + s);
}

struct PolicyResult {
    std::string policy;
    std::uint64_t capacity = 0;
    std::vector<std::uint64_t> misses;  // per iteration
    std::uint64_t total_accesses = 0;

    std::uint64_t total_misses() const {
        std::uint64_t t = 0;
        for (auto m : misses) t += m;
        return t;
    }
    double miss_ratio() const {
        return total_accesses == 0
                   ? 0.0
                   : static_cast<double>(total_misses()) / static_cast<double>(total_accesses);
    }
};

/// The num_entries nodes with highest out-degree, ties by lower node id.
inline std::vector<NodeId> static_degree_set(std::span<const std::uint64_t> out_degrees,
                                             std::uint64_t num_entries) {
    if (num_entries > out_degrees.size())
        throw std::invalid_argument("static set larger than node count");
    std::vector<NodeId> order(out_degrees.size());
    for (NodeId v = 0; v < order.size(); ++v) order[v] = v;
    std::sort(order.begin(), order.end(), [&](NodeId x, NodeId y) {
        if (out_degrees[x] != out_degrees[y]) return out_degrees[x] > out_degrees[y];
        return x < y;
    });
    order.resize(num_entries);
    return order;
}

/// Trace-driven miss counting for one (policy, capacity) point. The belady
/// policy delegates to the changeset simulator with its prefetched initial
/// state; static_degree needs `out_degrees`.
template <class Trace>
PolicyResult simulate_policy(const Trace& trace, std::uint64_t num_nodes,
                             std::uint64_t num_entries, CachePolicy policy,
                             std::span<const std::uint64_t> out_degrees = {}) {
    PolicyResult r;
    r.policy = policy_name(policy);
    r.capacity = num_entries;

    switch (policy) {
        case CachePolicy::none: {
            for (std::size_t i = 0; i < trace.iterations(); ++i) {
                auto ids = trace.ids(i);
                r.misses.push_back(ids.size());
                r.total_accesses += ids.size();
            }
            break;
        }
        case CachePolicy::static_degree: {
            if (out_degrees.size() != num_nodes)
                throw std::invalid_argument("static_degree requires out-degrees");
            std::vector<std::uint8_t> resident(num_nodes, 0);
            for (NodeId v : static_degree_set(out_degrees, num_entries)) resident[v] = 1;
            for (std::size_t i = 0; i < trace.iterations(); ++i) {
                std::uint64_t miss = 0;
                auto ids = trace.ids(i);
                for (NodeId v : ids) {
                    if (v >= num_nodes) throw std::out_of_range("trace id out of range");
                    if (!resident[v]) ++miss;
                }
                r.misses.push_back(miss);
                r.total_accesses += ids.size();
            }
            break;
        }
        case CachePolicy::lru: {
            std::list<NodeId> order;  // front = most recent
            std::unordered_map<NodeId, std::list<NodeId>::iterator> where;
            for (std::size_t i = 0; i < trace.iterations(); ++i) {
                std::uint64_t miss = 0;
                auto ids = trace.ids(i);
                for (NodeId v : ids) {
                    if (v >= num_nodes) throw std::out_of_range("trace id out of range");
                    auto it = where.find(v);
                    if (it != where.end()) {
                        order.splice(order.begin(), order, it->second);
                    } else {
                        ++miss;
                        if (num_entries == 0) continue;
                        if (where.size() == num_entries) {
                            where.erase(order.back());
                            order.pop_back();
                        }
                        order.push_front(v);
                        where[v] = order.begin();
                    }
                }
                r.misses.push_back(miss);
                r.total_accesses += ids.size();
            }
            break;
        }
        case CachePolicy::belady: {
            AccessIndex index = build_access_index(trace, num_nodes);
            auto init = compute_init_set(trace, num_entries, num_nodes);
            auto sim = simulate_changesets(index, trace, num_entries, init,
                                           [](std::size_t, const Changeset&,
                                              std::span<const NodeId>) {});
            r.misses = std::move(sim.misses);
            r.total_accesses = sim.total_accesses;
            break;
        }
    }
    return r;
}

} // namespace gx
