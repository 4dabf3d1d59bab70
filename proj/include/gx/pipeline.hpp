#pragma once

// Runtime orchestration: for every superbatch run the four stages
//   (1) superbatch sample          -> ids/adj files
//   (2) changeset precomputation   -> init/update files
//   (3) feature cache init         ("switch")
//   (4) main loop                  gather + cache update + compute stub
// and, when overlap is enabled, run the precomputation of superbatch k in
// parallel with the sampling of superbatch k+1. The two stages share nothing
// mutable, so results are identical with overlap on or off; the cost is that
// two superbatches' runtime files coexist on disk.
//
// Runtime files carry a global superbatch sequence number so that the files
// of adjacent superbatches (which may belong to different epochs) never
// collide while both are alive. All files of a superbatch are deleted once
// its main loop completes.

#include <chrono>
#include <optional>
#include <regex>

#include "gx/baselines.hpp"
#include "gx/feature_cache.hpp"
#include "gx/pipeline_config.hpp"

namespace gx {

// ---------------------------------------------------------------------------
// Compute stub
// ---------------------------------------------------------------------------

/// Stands in for model execution: an order-sensitive FNV-1a digest of the
/// gathered batch and the sampled adjacency. Used to check that caching and
/// scheduling configurations never change what the model would consume.
inline std::uint64_t compute_stub(const RowMatrix& batch,
                                  const std::vector<std::vector<LocalEdge>>& adj) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64 offset basis
    auto absorb = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ULL;
        }
    };
    auto absorb_u64 = [&](std::uint64_t v) { absorb(&v, 8); };
    absorb_u64(batch.rows);
    absorb(batch.data.data(), batch.data.size() * sizeof(float));
    absorb_u64(adj.size());
    for (const auto& layer : adj) {
        absorb_u64(layer.size());
        for (const auto& [src, dst] : layer) {
            std::uint32_t pair[2] = {src, dst};
            absorb(pair, sizeof(pair));
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct StageMetrics {
    std::uint64_t epoch = 0;
    std::uint64_t superbatch = 0;  // global sequence number (also in file names)
    std::uint64_t batches = 0;     // S' of this superbatch

    // Wall times of measured blocks, in milliseconds.
    double inspect_ms = 0;    // sample/precompute blocks attributed to this superbatch
    double sample_ms = 0;     // this superbatch's sample stage alone
    double precompute_ms = 0; // this superbatch's precompute stage alone
    double switch_ms = 0;     // feature cache initialization
    double data_prep_ms = 0;  // runtime file loading + gather
    double cache_update_ms = 0;
    double compute_ms = 0;

    IoStats sample_io, precompute_io, init_io, gather_io;
    std::uint64_t gather_hits = 0;
    std::uint64_t gather_misses = 0;
    std::uint64_t total_accesses = 0;

    std::uint64_t files_sample = 0;      // census: files created by sample
    std::uint64_t files_precompute = 0;  // census: files created by precompute
    std::uint64_t init_size = 0;

    std::vector<std::uint64_t> predicted_misses;  // from changeset precomputation
    std::vector<std::uint64_t> observed_misses;   // from the main loop gather
    std::vector<std::uint64_t> checksums;         // per-iteration compute stub
};

struct RunReport {
    std::vector<StageMetrics> superbatches;
    double total_wall_ms = 0;
    std::uint64_t max_superbatches_on_disk = 0;  // census over sampled instants

    double inspect_ms() const { return sum(&StageMetrics::inspect_ms); }
    double switch_ms() const { return sum(&StageMetrics::switch_ms); }
    double data_prep_ms() const { return sum(&StageMetrics::data_prep_ms); }
    double cache_update_ms() const { return sum(&StageMetrics::cache_update_ms); }
    double compute_ms() const { return sum(&StageMetrics::compute_ms); }

    std::uint64_t total_gather_misses() const {
        std::uint64_t t = 0;
        for (auto& sb : superbatches) t += sb.gather_misses;
        return t;
    }
    std::uint64_t total_accesses() const {
        std::uint64_t t = 0;
        for (auto& sb : superbatches) t += sb.total_accesses;
        return t;
    }
    IoStats total_sample_io() const {
        IoStats s;
        for (auto& sb : superbatches) s += sb.sample_io;
        return s;
    }
    IoStats total_gather_io() const {
        IoStats s;
        for (auto& sb : superbatches) s += sb.gather_io;
        return s;
    }

private:
    double sum(double StageMetrics::*f) const {
        double t = 0;
        for (auto& sb : superbatches) t += sb.*f;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Runtime file census
// ---------------------------------------------------------------------------

/// Counts distinct superbatch sequence numbers with files present in dir.
inline std::uint64_t census_superbatches_on_disk(const std::filesystem::path& dir) {
    static const std::regex pat(R"((ids|adj|init|update)_(\d+)(_\d+)?\.bin)");
    std::vector<std::uint64_t> seen;
    if (!std::filesystem::exists(dir)) return 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pat)) seen.push_back(std::stoull(m[2].str()));
    }
    std::sort(seen.begin(), seen.end());
    return static_cast<std::uint64_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

// ---------------------------------------------------------------------------
// Training runner
// ---------------------------------------------------------------------------

namespace detail {

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// Attributes consecutive time segments to categories with a single running
/// clock, so the categories tile the measured region without gaps.
class Ticker {
public:
    Ticker() : last_(std::chrono::steady_clock::now()) {}
    void attribute(double& category_ms) {
        auto now = std::chrono::steady_clock::now();
        category_ms += std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
    }

private:
    std::chrono::steady_clock::time_point last_;
};

} // namespace detail

class TrainingRunner {
public:
    explicit TrainingRunner(RunConfig cfg)
        : cfg_(std::move(cfg)),
          graph_(GraphFile::open(cfg_.graph_path)),
          features_(FeatureFile::open(cfg_.feature_path)) {
        cfg_.validate();
        if (features_.num_nodes() != graph_.num_nodes())
            throw std::invalid_argument("graph and feature files disagree on node count");
        std::filesystem::create_directories(cfg_.runtime_dir);
        train_ids_ = cfg_.train_ids.empty() ? derive_train_ids() : cfg_.train_ids;
        for (NodeId v : train_ids_)
            if (v >= graph_.num_nodes()) throw std::out_of_range("train id out of range");
    }

    const std::vector<NodeId>& train_ids() const { return train_ids_; }

    /// Runs all epochs; returns per-superbatch metrics and run totals.
    RunReport run() {
        detail::StopWatch total;
        RunReport report;

        // Flatten (epoch, superbatch) jobs so overlap can span epoch borders.
        struct Job {
            std::uint64_t epoch, seq, first_global_batch;
            std::vector<std::vector<NodeId>> batches;
        };
        std::vector<Job> jobs;
        std::uint64_t global_batch = 0, seq = 0;
        for (std::uint64_t e = 0; e < cfg_.epochs; ++e) {
            SeedPlan plan = plan_seed_batches(train_ids_, cfg_.batch_size, epoch_seed(e));
            for (std::size_t off = 0; off < plan.batches.size(); off += cfg_.superbatch_size) {
                std::size_t end =
                    std::min(off + cfg_.superbatch_size, plan.batches.size());
                Job j;
                j.epoch = e;
                j.seq = seq++;
                j.first_global_batch = global_batch;
                j.batches.assign(plan.batches.begin() + static_cast<std::ptrdiff_t>(off),
                                 plan.batches.begin() + static_cast<std::ptrdiff_t>(end));
                global_batch += j.batches.size();
                jobs.push_back(std::move(j));
            }
        }

        report.superbatches.resize(jobs.size());

        auto sample_job = [&](std::size_t j) {
            StageMetrics& m = report.superbatches[j];
            m.epoch = jobs[j].epoch;
            m.superbatch = jobs[j].seq;
            m.batches = jobs[j].batches.size();
            detail::StopWatch w;
            const NeighborCache* cache = nullptr;
            NeighborCache local;
            if (cfg_.use_neighbor_cache) {
                if (cfg_.keep_neighbor_cache_resident) {
                    if (!resident_ncache_)
                        resident_ncache_ = load_neighbor_cache(cfg_.neighbor_cache_path,
                                                               &m.sample_io);
                    cache = &*resident_ncache_;
                } else {
                    local = load_neighbor_cache(cfg_.neighbor_cache_path, &m.sample_io);
                    cache = &local;
                }
            }
            auto res = superbatch_sample(graph_, cache, jobs[j].batches, cfg_.fanouts,
                                         cfg_.seed, jobs[j].first_global_batch, jobs[j].seq,
                                         cfg_.runtime_dir, cfg_.sampler_workers);
            m.sample_io += res.io;
            m.files_sample = res.files_written;
            m.sample_ms = w.ms();
        };
        auto precompute_job = [&](std::size_t j) {
            StageMetrics& m = report.superbatches[j];
            detail::StopWatch w;
            FileTrace trace;
            for (std::uint64_t i = 0; i < jobs[j].batches.size(); ++i)
                trace.files.push_back(ids_file_path(cfg_.runtime_dir, jobs[j].seq, i));
            PrecomputeResult pr = precompute_changesets(trace, graph_.num_nodes(),
                                                        cfg_.feature_cache_entries,
                                                        cfg_.runtime_dir, jobs[j].seq);
            // The whole-trace passes are sequential reads of the ids files.
            for (const auto& f : trace.files) {
                std::uint64_t bytes = std::filesystem::file_size(f);
                m.precompute_io.bytes_read += 3 * bytes;
                m.precompute_io.pages_read += 3 * pages_touched(0, bytes);
            }
            m.files_precompute = pr.files_written;
            m.init_size = pr.init_size;
            m.predicted_misses = std::move(pr.sim.misses);
            m.precompute_ms = w.ms();
        };

        std::uint64_t census_max = 0;
        auto census = [&] {
            census_max = std::max(census_max, census_superbatches_on_disk(cfg_.runtime_dir));
        };

        // The ticker tiles the whole loop: every segment, including the file
        // census and cleanup (runtime-file lifecycle, charged to data prep),
        // lands in exactly one category.
        detail::Ticker ticker;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            StageMetrics& m = report.superbatches[j];

            // Inspect: this superbatch's precompute, overlapped with the next
            // superbatch's sample. Superbatch 0 samples alone first.
            if (j == 0) {
                sample_job(0);
                ticker.attribute(m.inspect_ms);
                census();
                ticker.attribute(m.data_prep_ms);
            }
            if (cfg_.overlap) {
                std::exception_ptr sample_error;
                std::thread t([&] {
                    try {
                        if (j + 1 < jobs.size()) sample_job(j + 1);
                    } catch (...) {
                        sample_error = std::current_exception();
                    }
                });
                try {
                    precompute_job(j);
                } catch (...) {
                    t.join();
                    throw;
                }
                t.join();
                if (sample_error) std::rethrow_exception(sample_error);
            } else {
                precompute_job(j);
                if (j + 1 < jobs.size()) sample_job(j + 1);
            }
            ticker.attribute(m.inspect_ms);
            census();
            ticker.attribute(m.data_prep_ms);

            run_executor(jobs[j].seq, jobs[j].batches.size(), m, ticker);

            census();
            cleanup_superbatch(jobs[j].seq, jobs[j].batches.size());
            ticker.attribute(m.data_prep_ms);
        }

        report.max_superbatches_on_disk = census_max;
        report.total_wall_ms = total.ms();
        return report;
    }

    /// All four stages of one superbatch, serially; used by tests that poke a
    /// single superbatch without the pipeline loop.
    StageMetrics run_superbatch(std::uint64_t seq, std::uint64_t first_global_batch,
                                std::span<const std::vector<NodeId>> batches) {
        StageMetrics m;
        m.superbatch = seq;
        m.batches = batches.size();
        {
            detail::StopWatch w;
            const NeighborCache* cache = nullptr;
            NeighborCache local;
            if (cfg_.use_neighbor_cache) {
                local = load_neighbor_cache(cfg_.neighbor_cache_path, &m.sample_io);
                cache = &local;
            }
            auto res = superbatch_sample(graph_, cache, batches, cfg_.fanouts, cfg_.seed,
                                         first_global_batch, seq, cfg_.runtime_dir,
                                         cfg_.sampler_workers);
            m.sample_io += res.io;
            m.files_sample = res.files_written;
            m.sample_ms = w.ms();
            m.inspect_ms += m.sample_ms;
        }
        {
            detail::StopWatch w;
            FileTrace trace;
            for (std::uint64_t i = 0; i < batches.size(); ++i)
                trace.files.push_back(ids_file_path(cfg_.runtime_dir, seq, i));
            PrecomputeResult pr = precompute_changesets(trace, graph_.num_nodes(),
                                                        cfg_.feature_cache_entries,
                                                        cfg_.runtime_dir, seq);
            m.files_precompute = pr.files_written;
            m.init_size = pr.init_size;
            m.predicted_misses = std::move(pr.sim.misses);
            m.precompute_ms = w.ms();
            m.inspect_ms += m.precompute_ms;
        }
        detail::Ticker ticker;
        run_executor(seq, batches.size(), m, ticker);
        cleanup_superbatch(seq, batches.size());
        return m;
    }

private:
    std::uint64_t epoch_seed(std::uint64_t epoch) const {
        return derive_seed(mix64(cfg_.seed) ^ 0x45504F4348ULL, epoch);
    }

    std::vector<NodeId> derive_train_ids() const {
        const std::uint64_t n = graph_.num_nodes();
        std::uint64_t want = static_cast<std::uint64_t>(
            static_cast<double>(n) * cfg_.train_fraction);
        want = std::min(std::max<std::uint64_t>(want, 1), n);
        std::vector<NodeId> all(n);
        for (NodeId v = 0; v < n; ++v) all[v] = v;
        SplitMix64 rng(derive_seed(mix64(cfg_.seed) ^ 0x545241494EULL, 0));
        for (std::uint64_t i = 0; i < want; ++i) {
            std::uint64_t j = i + rng.bounded(n - i);
            std::swap(all[i], all[j]);
        }
        all.resize(want);
        std::sort(all.begin(), all.end());
        return all;
    }

    /// Stages (3) and (4): feature cache initialization and the main loop.
    /// The ticker's current segment is attributed per sub-step.
    void run_executor(std::uint64_t seq, std::uint64_t batch_count, StageMetrics& m,
                      detail::Ticker& ticker) {
        std::optional<FeatureCache> cache;
        std::vector<NodeId> init;
        init = read_init_file(init_file_path(cfg_.runtime_dir, seq));
        cache.emplace(features_, init, cfg_.feature_cache_entries, m.init_io);
        ticker.attribute(m.switch_ms);

        RowMatrix batch;
        for (std::uint64_t i = 0; i < batch_count; ++i) {
            auto ids = read_ids_file(ids_file_path(cfg_.runtime_dir, seq, i));
            auto adj = read_adj_file(adj_file_path(cfg_.runtime_dir, seq, i));
            auto counts = cache->gather(features_, ids, batch, m.gather_io);
            ticker.attribute(m.data_prep_ms);
            m.gather_hits += counts.hits;
            m.gather_misses += counts.misses;
            m.observed_misses.push_back(counts.misses);
            m.total_accesses += ids.size();

            Changeset cs = read_update_file(update_file_path(cfg_.runtime_dir, seq, i));
            cache->apply_changeset(batch, ids, cs);
            ticker.attribute(m.cache_update_ms);

            m.checksums.push_back(compute_stub(batch, adj));
            ticker.attribute(m.compute_ms);
        }
    }

    void cleanup_superbatch(std::uint64_t seq, std::uint64_t batch_count) {
        auto must_remove = [](const std::filesystem::path& p) {
            if (!std::filesystem::remove(p))
                throw std::runtime_error("runtime file missing at cleanup: " + p.string());
        };
        for (std::uint64_t i = 0; i < batch_count; ++i) {
            must_remove(ids_file_path(cfg_.runtime_dir, seq, i));
            must_remove(adj_file_path(cfg_.runtime_dir, seq, i));
            must_remove(update_file_path(cfg_.runtime_dir, seq, i));
        }
        must_remove(init_file_path(cfg_.runtime_dir, seq));
    }

    RunConfig cfg_;
    GraphFile graph_;
    FeatureFile features_;
    std::vector<NodeId> train_ids_;
    std::optional<NeighborCache> resident_ncache_;
};

inline RunReport run_training(const RunConfig& cfg) { return TrainingRunner(cfg).run(); }

} // namespace gx
