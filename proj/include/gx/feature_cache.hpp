#pragma once

// Executor-side dynamic feature cache. Direct addressing like the neighbor
// cache, but rows are fixed width, so cache storage is a num_entries x dim
// matrix and the address table holds row indices. The cache is mutated only
// by applying precomputed changesets: evicted rows free their slots, and
// inserted rows are copied straight out of the gathered batch buffer at the
// positions recorded in in_positions; an insertion never touches the disk.

#include "gx/changeset.hpp"
#include "gx/graph_store.hpp"

namespace gx {

class FeatureCache {
public:
    /// Builds the cache over `store` with `num_entries` row slots and
    /// prefetches the rows of init_ids (distinct, becomes slots 0..k-1).
    FeatureCache(const FeatureFile& store, std::span<const NodeId> init_ids,
                 std::uint64_t num_entries, IoStats& stats)
        : dim_(store.dim()), num_entries_(num_entries) {
        if (init_ids.size() > num_entries)
            throw std::invalid_argument("init set larger than feature cache capacity");
        address_table_.assign(store.num_nodes(), -1);
        rows_.resize(static_cast<std::size_t>(num_entries) * dim_);
        // Free slots pop in ascending order after the init prefix.
        free_slots_.reserve(num_entries - init_ids.size());
        for (std::uint64_t s = num_entries; s > init_ids.size(); --s)
            free_slots_.push_back(s - 1);
        for (std::size_t k = 0; k < init_ids.size(); ++k) {
            NodeId v = init_ids[k];
            if (v >= address_table_.size()) throw std::out_of_range("init id out of range");
            if (address_table_[v] >= 0) throw std::invalid_argument("duplicate init id");
            store.read_row(v, row(k), stats);
            address_table_[v] = static_cast<std::int64_t>(k);
        }
    }

    std::uint64_t num_entries() const { return num_entries_; }
    std::uint32_t dim() const { return dim_; }

    bool contains(NodeId v) const { return address_table_[v] >= 0; }

    std::span<const float> cached_row(NodeId v) const {
        std::int64_t slot = address_table_[v];
        if (slot < 0) throw std::logic_error("cached_row on a miss");
        return row(static_cast<std::size_t>(slot));
    }

    struct GatherCounts {
        std::uint64_t hits = 0;
        std::uint64_t misses = 0;
    };

    /// Collects the rows of `ids` (distinct) into `out`, row order = ids
    /// order. Hits are copied from the cache; misses are read from the store
    /// and charged per row.
    GatherCounts gather(const FeatureFile& store, std::span<const NodeId> ids, RowMatrix& out,
                        IoStats& stats) const {
        out.resize(ids.size(), dim_);
        GatherCounts counts;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            NodeId v = ids[k];
            if (v >= address_table_.size()) throw std::out_of_range("gather id out of range");
            std::int64_t slot = address_table_[v];
            if (slot >= 0) {
                auto src = row(static_cast<std::size_t>(slot));
                std::copy(src.begin(), src.end(), out.row(k).begin());
                counts.hits++;
            } else {
                store.read_row(v, out.row(k), stats);
                counts.misses++;
            }
        }
        return counts;
    }

    RowMatrix gather(const FeatureFile& store, std::span<const NodeId> ids, IoStats& stats,
                     GatherCounts* counts = nullptr) const {
        RowMatrix m;
        GatherCounts c = gather(store, ids, m, stats);
        if (counts) *counts = c;
        return m;
    }

    /// Applies one iteration's changeset: frees every out_id's slot, then
    /// copies each in_id's row from the batch buffer (at in_positions[k])
    /// into an evicted slot (in out_ids order) or a free-list slot.
    void apply_changeset(const RowMatrix& batch, std::span<const NodeId> ids,
                         const Changeset& cs) {
        if (cs.in_ids.size() != cs.in_positions.size())
            throw std::invalid_argument("changeset arrays disagree in length");
        if (batch.rows != ids.size() || batch.dim != dim_)
            throw std::invalid_argument("batch buffer does not match ids");

        // Validate against the pre-update state before mutating anything.
        for (std::size_t k = 0; k < cs.in_ids.size(); ++k) {
            NodeId v = cs.in_ids[k];
            std::uint64_t pos = cs.in_positions[k];
            if (pos >= ids.size() || ids[pos] != v)
                throw std::logic_error("changeset position does not match ids");
            if (address_table_[v] >= 0) throw std::logic_error("inserted node already cached");
        }
        std::vector<std::uint64_t> freed;
        freed.reserve(cs.out_ids.size());
        for (NodeId v : cs.out_ids) {
            if (v >= address_table_.size() || address_table_[v] < 0)
                throw std::logic_error("evicted node is not cached");
            freed.push_back(static_cast<std::uint64_t>(address_table_[v]));
        }
        if (cs.in_ids.size() > freed.size() + free_slots_.size())
            throw std::logic_error("changeset overflows cache capacity");

        for (NodeId v : cs.out_ids) address_table_[v] = -1;
        for (std::size_t k = 0; k < cs.in_ids.size(); ++k) {
            std::uint64_t slot;
            if (k < freed.size()) {
                slot = freed[k];
            } else {
                slot = free_slots_.back();
                free_slots_.pop_back();
            }
            auto src = batch.row(cs.in_positions[k]);
            std::copy(src.begin(), src.end(), row(static_cast<std::size_t>(slot)).begin());
            address_table_[cs.in_ids[k]] = static_cast<std::int64_t>(slot);
        }
        // Surplus evicted slots (under-full insertions) return to the pool.
        for (std::size_t k = cs.in_ids.size(); k < freed.size(); ++k)
            free_slots_.push_back(freed[k]);
    }

    /// Sorted list of resident node ids (test/diagnostic helper).
    std::vector<NodeId> resident_set() const {
        std::vector<NodeId> r;
        for (NodeId v = 0; v < address_table_.size(); ++v)
            if (address_table_[v] >= 0) r.push_back(v);
        return r;
    }

private:
    std::span<float> row(std::size_t slot) { return {rows_.data() + slot * dim_, dim_}; }
    std::span<const float> row(std::size_t slot) const {
        return {rows_.data() + slot * dim_, dim_};
    }

    std::uint32_t dim_;
    std::uint64_t num_entries_;
    std::vector<std::int64_t> address_table_;
    std::vector<float> rows_;
    std::vector<std::uint64_t> free_slots_;  // back = next slot to hand out
};

} // namespace gx
