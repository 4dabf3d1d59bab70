#pragma once

// Inspector core: given the access traces (ids files) of a whole superbatch,
// precompute the initial prefetch set and the per-iteration cache changesets
// for an offline-optimal feature cache.
//
// The cache state recurrence is
//     C_{i+1} = the num_entries members of (C_i u ids_i) whose next accessed
//               iteration is smallest,
// with ties broken in favor of incumbents of C_i and then lower node id.
//
// Next-access tracking uses a CSR-like index over the traces: `iters` lists
//each node's accessed iterations in sequence (region starts carry the MSB
// flag), terminated by an all-ones dummy entry; `ptr` holds one cursor per
// node. Advancing the cursor of every accessed node per iteration keeps
// iters[ptr[v]] equal to v's next accessed iteration, so one pass over the
// trace simulates all S cache states. A deliberately naive oracle that
// rescans future iterations and an exhaustive DP over tiny instances validate
// the simulation.
//
// Runtime files:
//   init_{sb}.bin       magic "GXINIT01": count u64, node ids u64 LE
//   update_{sb}_{i}.bin magic "GXUPD001": three u64 arrays, each preceded by
//                       its u64 length: in_ids, out_ids, in_positions

#include <functional>

#include "gx/sampler.hpp"

namespace gx {

constexpr char kInitMagic[8] = {'G', 'X', 'I', 'N', 'I', 'T', '0', '1'};
constexpr char kUpdateMagic[8] = {'G', 'X', 'U', 'P', 'D', '0', '0', '1'};

constexpr std::uint64_t kIterFlag = std::uint64_t{1} << 63;
constexpr std::uint64_t kIterMask = kIterFlag - 1;
constexpr std::uint64_t kIterDummy = ~std::uint64_t{0};

// ---------------------------------------------------------------------------
// Trace sources
// ---------------------------------------------------------------------------

/// In-memory access trace; one deduplicated ids list per iteration.
struct MemoryTrace {
    const std::vector<std::vector<NodeId>>* trace;
    std::size_t iterations() const { return trace->size(); }
    std::vector<NodeId> ids(std::size_t i) const { return (*trace)[i]; }
};

/// File-backed access trace over ids_{sb}_{i}.bin files in batch order.
struct FileTrace {
    std::vector<std::filesystem::path> files;
    std::size_t iterations() const { return files.size(); }
    std::vector<NodeId> ids(std::size_t i) const { return read_ids_file(files[i]); }
};

// ---------------------------------------------------------------------------
// AccessIndex construction (two passes over the trace)
// ---------------------------------------------------------------------------

struct AccessIndex {
    std::vector<std::uint64_t> iters;  // per-node iteration lists + dummy tail
    std::vector<std::uint64_t> ptr;    // region start per node

    std::uint64_t total_accesses() const { return iters.size() - 1; }
    std::uint64_t dummy_index() const { return iters.size() - 1; }
    std::uint64_t access_count(NodeId v) const {
        std::uint64_t end = v + 1 < ptr.size() ? ptr[v + 1] : total_accesses();
        return end - ptr[v];
    }
};

/// Pass 1: per-node appearance counts. Also rejects duplicate ids within an
/// iteration and out-of-range ids.
template <class Trace>
std::vector<std::uint64_t> count_pass(const Trace& trace, std::uint64_t num_nodes) {
    std::vector<std::uint64_t> counts(num_nodes, 0);
    std::vector<std::uint64_t> stamp(num_nodes, kIterDummy);
    for (std::size_t i = 0; i < trace.iterations(); ++i) {
        for (NodeId v : trace.ids(i)) {
            if (v >= num_nodes) throw std::out_of_range("trace id out of range");
            if (stamp[v] == i) throw std::logic_error("duplicate id within one iteration");
            stamp[v] = i;
            counts[v]++;
        }
    }
    return counts;
}

/// Exclusive prefix sum of the counts.
inline std::vector<std::uint64_t> build_ptr(std::span<const std::uint64_t> counts) {
    std::vector<std::uint64_t> ptr(counts.size());
    std::uint64_t acc = 0;
    for (std::size_t v = 0; v < counts.size(); ++v) {
        ptr[v] = acc;
        acc += counts[v];
    }
    return ptr;
}

/// Pass 2: scatter iteration numbers into each node's region, then append the
/// dummy entry and set the region-start flag of every accessed node.
template <class Trace>
AccessIndex build_iters(const Trace& trace, std::span<const std::uint64_t> ptr,
                        std::span<const std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;

    AccessIndex ix;
    ix.ptr.assign(ptr.begin(), ptr.end());
    ix.iters.assign(total + 1, 0);
    std::vector<std::uint64_t> cursor(ptr.begin(), ptr.end());
    for (std::size_t i = 0; i < trace.iterations(); ++i) {
        if (static_cast<std::uint64_t>(i) >= kIterFlag)
            throw std::overflow_error("iteration index not representable");
        for (NodeId v : trace.ids(i)) ix.iters[cursor[v]++] = i;
    }
    ix.iters[total] = kIterDummy;
    for (std::size_t v = 0; v < counts.size(); ++v)
        if (counts[v] > 0) ix.iters[ix.ptr[v]] |= kIterFlag;
    return ix;
}

template <class Trace>
AccessIndex build_access_index(const Trace& trace, std::uint64_t num_nodes) {
    auto counts = count_pass(trace, num_nodes);
    auto ptr = build_ptr(counts);
    return build_iters(trace, ptr, counts);
}

// ---------------------------------------------------------------------------
// Initial prefetch set
// ---------------------------------------------------------------------------

/// First occurrences in trace order until the cache is full (or the trace is
/// exhausted); admission order is preserved for slot assignment.
template <class Trace>
std::vector<NodeId> compute_init_set(const Trace& trace, std::uint64_t num_entries,
                                     std::uint64_t num_nodes) {
    std::vector<NodeId> init;
    if (num_entries == 0) return init;
    std::vector<std::uint8_t> seen(num_nodes, 0);
    for (std::size_t i = 0; i < trace.iterations() && init.size() < num_entries; ++i) {
        for (NodeId v : trace.ids(i)) {
            if (v >= num_nodes) throw std::out_of_range("trace id out of range");
            if (seen[v]) continue;
            seen[v] = 1;
            init.push_back(v);
            if (init.size() == num_entries) break;
        }
    }
    return init;
}

// ---------------------------------------------------------------------------
// Changesets
// ---------------------------------------------------------------------------

/// Cache delta for one iteration. in_ids are ordered by their position within
/// the iteration's ids (ascending); out_ids are ordered by node id.
struct Changeset {
    std::vector<NodeId> in_ids;
    std::vector<NodeId> out_ids;
    std::vector<std::uint64_t> in_positions;

    bool operator==(const Changeset&) const = default;
};

struct SimulationResult {
    std::vector<std::uint64_t> misses;  // per iteration: |ids_i \ C_i|
    std::uint64_t total_accesses = 0;

    std::uint64_t total_misses() const {
        std::uint64_t t = 0;
        for (auto m : misses) t += m;
        return t;
    }
};

namespace detail {

struct Candidate {
    std::uint64_t next_access;
    std::uint8_t is_new;  // 0 = incumbent of C_i, 1 = entering via ids_i
    NodeId id;
    std::uint64_t position;  // position within ids_i (new candidates only)
};

inline bool candidate_before(const Candidate& a, const Candidate& b) {
    if (a.next_access != b.next_access) return a.next_access < b.next_access;
    if (a.is_new != b.is_new) return a.is_new < b.is_new;
    return a.id < b.id;
}

/// Derives the canonical changeset and the new sorted state from a selected
/// candidate prefix; shared by the simulator and the naive oracle so both
/// emit byte-identical artifacts.
inline Changeset finish_selection(std::vector<Candidate>& cand, std::size_t keep,
                                  std::vector<NodeId>& state_sorted) {
    Changeset cs;
    std::vector<NodeId> new_state;
    new_state.reserve(keep);
    std::vector<std::pair<std::uint64_t, NodeId>> incoming;  // (position, id)
    for (std::size_t k = 0; k < keep; ++k) {
        new_state.push_back(cand[k].id);
        if (cand[k].is_new) incoming.push_back({cand[k].position, cand[k].id});
    }
    for (std::size_t k = keep; k < cand.size(); ++k)
        if (!cand[k].is_new) cs.out_ids.push_back(cand[k].id);

    std::sort(incoming.begin(), incoming.end());
    for (auto& [pos, id] : incoming) {
        cs.in_ids.push_back(id);
        cs.in_positions.push_back(pos);
    }
    std::sort(cs.out_ids.begin(), cs.out_ids.end());
    std::sort(new_state.begin(), new_state.end());
    state_sorted = std::move(new_state);
    return cs;
}

} // namespace detail

/// Simulates the whole superbatch in one pass over the trace using the
/// AccessIndex. For every iteration the sink receives
///   (iteration, changeset, sorted cache state after the update).
/// Returns per-iteration miss counts. `init` becomes C_0.
template <class Trace, class Sink>
SimulationResult simulate_changesets(const AccessIndex& index, const Trace& trace,
                                     std::uint64_t num_entries, std::span<const NodeId> init,
                                     Sink&& sink) {
    const std::uint64_t num_nodes = index.ptr.size();
    std::vector<std::uint64_t> cursor(index.ptr.begin(), index.ptr.end());
    const std::uint64_t dummy = index.dummy_index();

    std::vector<std::uint8_t> resident(num_nodes, 0);
    std::vector<NodeId> state;  // kept sorted ascending
    for (NodeId v : init) {
        if (v >= num_nodes) throw std::out_of_range("init id out of range");
        if (index.access_count(v) == 0)
            throw std::logic_error("init id never appears in the trace (index/trace mismatch)");
        if (resident[v]) throw std::logic_error("duplicate id in init set");
        resident[v] = 1;
        state.push_back(v);
    }
    if (state.size() > num_entries) throw std::invalid_argument("init set exceeds capacity");
    std::sort(state.begin(), state.end());

    SimulationResult result;
    result.misses.reserve(trace.iterations());
    std::vector<detail::Candidate> cand;
    std::vector<std::uint64_t> stamp(num_nodes, kIterDummy);

    for (std::size_t i = 0; i < trace.iterations(); ++i) {
        const std::vector<NodeId> ids = trace.ids(i);
        result.total_accesses += ids.size();

        // Advance cursors of the accessed nodes; a cursor that lands on a
        // flagged entry has left its region and is parked on the dummy.
        std::uint64_t miss = 0;
        for (NodeId v : ids) {
            if (v >= num_nodes) throw std::out_of_range("trace id out of range");
            if (stamp[v] == i) throw std::logic_error("duplicate id within one iteration");
            stamp[v] = i;
            if (index.access_count(v) == 0)
                throw std::logic_error("accessed node missing from index (index/trace mismatch)");
            if (!resident[v]) ++miss;
            std::uint64_t c = cursor[v] + 1;
            cursor[v] = (index.iters[c] & kIterFlag) ? dummy : c;
        }
        result.misses.push_back(miss);

        // Candidates: incumbents first, then the ids entering this iteration.
        cand.clear();
        cand.reserve(state.size() + ids.size());
        for (NodeId v : state)
            cand.push_back({index.iters[cursor[v]] & kIterMask, 0, v, 0});
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
            NodeId v = ids[pos];
            if (!resident[v])
                cand.push_back({index.iters[cursor[v]] & kIterMask, 1, v, pos});
        }

        std::size_t keep = std::min<std::size_t>(num_entries, cand.size());
        if (keep < cand.size())
            std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep),
                             cand.end(), detail::candidate_before);

        Changeset cs = detail::finish_selection(cand, keep, state);
        for (NodeId v : cs.out_ids) resident[v] = 0;
        for (NodeId v : cs.in_ids) resident[v] = 1;
        sink(i, cs, std::span<const NodeId>(state));
    }
    return result;
}

/// Reference implementation of the same recurrence with next accesses found
/// by scanning the future iterations of the trace; worst-case quadratic in
/// the superbatch size. Shares no state machinery with simulate_changesets.
template <class Trace, class Sink>
SimulationResult naive_belady_oracle(const Trace& trace, std::uint64_t num_entries,
                                     std::span<const NodeId> init, std::uint64_t num_nodes,
                                     Sink&& sink) {
    const std::size_t n_iter = trace.iterations();
    // Per-iteration membership sets; representation aside, next accesses are
    // still located by forward scanning.
    std::vector<std::vector<NodeId>> sorted_ids(n_iter);
    for (std::size_t i = 0; i < n_iter; ++i) {
        sorted_ids[i] = trace.ids(i);
        std::sort(sorted_ids[i].begin(), sorted_ids[i].end());
    }
    auto appears_at = [&](NodeId v, std::size_t j) {
        return std::binary_search(sorted_ids[j].begin(), sorted_ids[j].end(), v);
    };
    auto next_access_after = [&](NodeId v, std::size_t i) -> std::uint64_t {
        for (std::size_t j = i + 1; j < n_iter; ++j)
            if (appears_at(v, j)) return j;
        return kIterMask;  // never again
    };

    std::vector<std::uint8_t> resident(num_nodes, 0);
    std::vector<NodeId> state;
    for (NodeId v : init) {
        if (v >= num_nodes) throw std::out_of_range("init id out of range");
        resident[v] = 1;
        state.push_back(v);
    }
    if (state.size() > num_entries) throw std::invalid_argument("init set exceeds capacity");
    std::sort(state.begin(), state.end());

    SimulationResult result;
    std::vector<detail::Candidate> cand;
    for (std::size_t i = 0; i < n_iter; ++i) {
        const std::vector<NodeId> ids = trace.ids(i);
        result.total_accesses += ids.size();
        std::uint64_t miss = 0;

        cand.clear();
        for (NodeId v : state)
            cand.push_back({next_access_after(v, i), 0, v, 0});
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
            NodeId v = ids[pos];
            if (!resident[v]) {
                ++miss;
                cand.push_back({next_access_after(v, i), 1, v, pos});
            }
        }
        result.misses.push_back(miss);

        std::sort(cand.begin(), cand.end(), detail::candidate_before);
        std::size_t keep = std::min<std::size_t>(num_entries, cand.size());
        Changeset cs = detail::finish_selection(cand, keep, state);
        for (NodeId v : cs.out_ids) resident[v] = 0;
        for (NodeId v : cs.in_ids) resident[v] = 1;
        sink(i, cs, std::span<const NodeId>(state));
    }
    return result;
}

/// Exhaustive minimum over all admissible cache state sequences starting from
/// an empty cache: C_{i+1} subset of (C_i u ids_i), |C_{i+1}| <= capacity.
/// Only tractable for tiny instances; used as the optimality oracle.
inline std::uint64_t dp_optimal_misses(const std::vector<std::vector<NodeId>>& trace,
                                       std::uint64_t num_entries) {
    std::vector<NodeId> labels;
    std::vector<std::uint32_t> access_masks(trace.size(), 0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        for (NodeId v : trace[i]) {
            auto it = std::find(labels.begin(), labels.end(), v);
            std::size_t bit = static_cast<std::size_t>(it - labels.begin());
            if (it == labels.end()) labels.push_back(v);
            access_masks[i] |= std::uint32_t{1} << bit;
        }
    }
    if (labels.size() > 8 || trace.size() > 6 || num_entries > 3)
        throw std::invalid_argument("dp_optimal_misses: instance too large");

    const std::size_t n_masks = std::size_t{1} << labels.size();
    constexpr std::uint64_t kInf = ~std::uint64_t{0};
    std::vector<std::uint64_t> dp(n_masks, kInf), ndp(n_masks);
    dp[0] = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::fill(ndp.begin(), ndp.end(), kInf);
        const std::uint32_t a = access_masks[i];
        for (std::size_t mask = 0; mask < n_masks; ++mask) {
            if (dp[mask] == kInf) continue;
            const std::uint64_t cost =
                dp[mask] + static_cast<std::uint64_t>(std::popcount(a & ~static_cast<std::uint32_t>(mask)));
            const std::uint32_t u = static_cast<std::uint32_t>(mask) | a;
            std::uint32_t s = u;
            for (;;) {
                if (std::popcount(s) <= static_cast<int>(num_entries) && cost < ndp[s])
                    ndp[s] = cost;
                if (s == 0) break;
                s = (s - 1) & u;
            }
        }
        dp.swap(ndp);
    }
    std::uint64_t best = kInf;
    for (auto v : dp) best = std::min(best, v);
    return best;
}

// ---------------------------------------------------------------------------
// Runtime files
// ---------------------------------------------------------------------------

inline std::filesystem::path init_file_path(const std::filesystem::path& dir, std::uint64_t sb) {
    return dir / ("init_" + std::to_string(sb) + ".bin");
}
inline std::filesystem::path update_file_path(const std::filesystem::path& dir, std::uint64_t sb,
                                              std::uint64_t i) {
    return dir / ("update_" + std::to_string(sb) + "_" + std::to_string(i) + ".bin");
}

inline void write_init_file(const std::filesystem::path& path, std::span<const NodeId> ids) {
    BinWriter w(path);
    w.magic(kInitMagic);
    w.u64(ids.size());
    w.u64_array(ids);
    w.close();
}

inline std::vector<NodeId> read_init_file(const std::filesystem::path& path) {
    BinReader r(path);
    r.expect_magic(kInitMagic);
    std::uint64_t n = r.u64();
    return r.u64_array(n);
}

inline void write_update_file(const std::filesystem::path& path, const Changeset& cs) {
    BinWriter w(path);
    w.magic(kUpdateMagic);
    w.u64(cs.in_ids.size());
    w.u64_array(cs.in_ids);
    w.u64(cs.out_ids.size());
    w.u64_array(cs.out_ids);
    w.u64(cs.in_positions.size());
    w.u64_array(cs.in_positions);
    w.close();
}

inline Changeset read_update_file(const std::filesystem::path& path) {
    BinReader r(path);
    r.expect_magic(kUpdateMagic);
    Changeset cs;
    cs.in_ids = r.u64_array(r.u64());
    cs.out_ids = r.u64_array(r.u64());
    cs.in_positions = r.u64_array(r.u64());
    if (cs.in_positions.size() != cs.in_ids.size())
        throw std::runtime_error("update file is inconsistent: " + path.string());
    return cs;
}

// ---------------------------------------------------------------------------
// Whole-stage driver (three passes over the ids files)
// ---------------------------------------------------------------------------

struct PrecomputeResult {
    std::uint64_t files_written = 0;  // S' update files + 1 init file
    SimulationResult sim;
    std::uint64_t init_size = 0;
};

/// Runs the full changeset precomputation for one superbatch: builds the
/// AccessIndex, derives the prefetch set and writes init/update files.
inline PrecomputeResult precompute_changesets(const FileTrace& trace, std::uint64_t num_nodes,
                                              std::uint64_t num_entries,
                                              const std::filesystem::path& out_dir,
                                              std::uint64_t sb_index) {
    AccessIndex index = build_access_index(trace, num_nodes);
    std::vector<NodeId> init = compute_init_set(trace, num_entries, num_nodes);
    write_init_file(init_file_path(out_dir, sb_index), init);

    PrecomputeResult r;
    r.init_size = init.size();
    r.sim = simulate_changesets(index, trace, num_entries, init,
                                [&](std::size_t i, const Changeset& cs, std::span<const NodeId>) {
                                    write_update_file(update_file_path(out_dir, sb_index, i), cs);
                                });
    r.files_written = trace.iterations() + 1;
    return r;
}

} // namespace gx
