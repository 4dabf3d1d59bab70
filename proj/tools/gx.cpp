// Command-line driver: dataset generation, neighbor cache preprocessing,
// training runs with report emission, trace-driven cache policy simulation
// and report pretty-printing.

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <fstream>
#include <iostream>
#include <map>

#include "gx/graphgen.hpp"
#include "gx/pipeline.hpp"

using json = nlohmann::json;
using namespace gx;

namespace {

// ---------------------------------------------------------------------------
// Config file <-> RunConfig
// ---------------------------------------------------------------------------

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    json j = json::parse(in);

    RunConfig cfg;
    cfg.graph_path = j.at("graph").get<std::string>();
    cfg.feature_path = j.at("features").get<std::string>();
    if (j.contains("neighbor_cache"))
        cfg.neighbor_cache_path = j["neighbor_cache"].get<std::string>();
    if (j.contains("runtime_dir")) cfg.runtime_dir = j["runtime_dir"].get<std::string>();
    if (j.contains("fanouts")) cfg.fanouts = j["fanouts"].get<Fanouts>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::uint64_t>();
    if (j.contains("superbatch_size"))
        cfg.superbatch_size = j["superbatch_size"].get<std::uint64_t>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::uint64_t>();
    if (j.contains("feature_cache_entries"))
        cfg.feature_cache_entries = j["feature_cache_entries"].get<std::uint64_t>();
    if (j.contains("sampler_workers"))
        cfg.sampler_workers = j["sampler_workers"].get<unsigned>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("train_fraction")) cfg.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("train_ids")) cfg.train_ids = j["train_ids"].get<std::vector<NodeId>>();
    if (j.contains("overlap")) cfg.overlap = j["overlap"].get<bool>();
    if (j.contains("use_neighbor_cache"))
        cfg.use_neighbor_cache = j["use_neighbor_cache"].get<bool>();
    if (j.contains("keep_neighbor_cache_resident"))
        cfg.keep_neighbor_cache_resident = j["keep_neighbor_cache_resident"].get<bool>();
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["graph"] = cfg.graph_path.string();
    j["features"] = cfg.feature_path.string();
    j["neighbor_cache"] = cfg.neighbor_cache_path.string();
    j["runtime_dir"] = cfg.runtime_dir.string();
    j["fanouts"] = cfg.fanouts;
    j["batch_size"] = cfg.batch_size;
    j["superbatch_size"] = cfg.superbatch_size;
    j["epochs"] = cfg.epochs;
    j["feature_cache_entries"] = cfg.feature_cache_entries;
    j["sampler_workers"] = cfg.sampler_workers;
    j["seed"] = cfg.seed;
    j["train_fraction"] = cfg.train_fraction;
    j["overlap"] = cfg.overlap;
    j["use_neighbor_cache"] = cfg.use_neighbor_cache;
    j["keep_neighbor_cache_resident"] = cfg.keep_neighbor_cache_resident;
    return j;
}

json iostats_to_json(const IoStats& s) {
    return json{{"pages_read", s.pages_read},
                {"rows_read", s.rows_read},
                {"neighbor_lists_read", s.neighbor_lists_read},
                {"bytes_read", s.bytes_read}};
}

void write_report_json(const std::filesystem::path& path, const RunConfig& cfg,
                       const RunReport& r) {
    json j;
    j["config"] = config_to_json(cfg);
    j["totals"] = {
        {"wall_ms", r.total_wall_ms},
        {"inspect_ms", r.inspect_ms()},
        {"switch_ms", r.switch_ms()},
        {"data_prep_ms", r.data_prep_ms()},
        {"cache_update_ms", r.cache_update_ms()},
        {"compute_ms", r.compute_ms()},
        {"accesses", r.total_accesses()},
        {"gather_misses", r.total_gather_misses()},
        {"sample_io", iostats_to_json(r.total_sample_io())},
        {"gather_io", iostats_to_json(r.total_gather_io())},
        {"max_superbatches_on_disk", r.max_superbatches_on_disk},
    };
    j["superbatches"] = json::array();
    for (const auto& sb : r.superbatches) {
        j["superbatches"].push_back({
            {"epoch", sb.epoch},
            {"superbatch", sb.superbatch},
            {"batches", sb.batches},
            {"inspect_ms", sb.inspect_ms},
            {"sample_ms", sb.sample_ms},
            {"precompute_ms", sb.precompute_ms},
            {"switch_ms", sb.switch_ms},
            {"data_prep_ms", sb.data_prep_ms},
            {"cache_update_ms", sb.cache_update_ms},
            {"compute_ms", sb.compute_ms},
            {"gather_hits", sb.gather_hits},
            {"gather_misses", sb.gather_misses},
            {"accesses", sb.total_accesses},
            {"files_sample", sb.files_sample},
            {"files_precompute", sb.files_precompute},
            {"init_size", sb.init_size},
            {"sample_io", iostats_to_json(sb.sample_io)},
            {"gather_io", iostats_to_json(sb.gather_io)},
            {"init_io", iostats_to_json(sb.init_io)},
            {"predicted_misses", sb.predicted_misses},
            {"observed_misses", sb.observed_misses},
            {"checksums", sb.checksums},
        });
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path.string());
    out << j.dump(2) << "\n";
}

// Fixed column order; documented in the README.
void write_report_csv(const std::filesystem::path& path, const RunReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path.string());
    out << "epoch,superbatch,batches,inspect_ms,sample_ms,precompute_ms,switch_ms,"
           "data_prep_ms,cache_update_ms,compute_ms,gather_hits,gather_misses,accesses,"
           "sample_pages,gather_pages,init_pages\n";
    for (const auto& sb : r.superbatches) {
        out << sb.epoch << ',' << sb.superbatch << ',' << sb.batches << ',' << sb.inspect_ms
            << ',' << sb.sample_ms << ',' << sb.precompute_ms << ',' << sb.switch_ms << ','
            << sb.data_prep_ms << ',' << sb.cache_update_ms << ',' << sb.compute_ms << ','
            << sb.gather_hits << ',' << sb.gather_misses << ',' << sb.total_accesses << ','
            << sb.sample_io.pages_read << ',' << sb.gather_io.pages_read << ','
            << sb.init_io.pages_read << "\n";
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen(std::uint64_t nodes, double avg_degree, std::uint32_t dim, std::uint64_t seed,
            const std::string& out_dir) {
    GenSpec spec;
    spec.num_nodes = nodes;
    spec.avg_degree = avg_degree;
    spec.dim = dim;
    spec.edge_seed = derive_seed(seed, 0xED6E5);
    spec.value_seed = derive_seed(seed, 0xFEA7);
    GenResult r = generate_dataset(spec, out_dir);
    std::cout << "generated dataset in " << out_dir << "\n"
              << "  nodes:          " << r.num_nodes << "\n"
              << "  edges (dedup):  " << r.num_edges << "\n"
              << "  graph bytes:    " << r.graph_bytes << "\n"
              << "  feature bytes:  " << r.feature_bytes << " (dim " << dim << ")\n";
    return 0;
}

int cmd_preprocess(const std::string& graph_path, std::uint64_t budget_bytes,
                   const std::string& out_path) {
    GraphFile graph = GraphFile::open(graph_path);
    IoStats io;
    NeighborCache cache = build_neighbor_cache(graph, budget_bytes, &io);
    persist_neighbor_cache(cache, out_path);
    std::cout << "neighbor cache written to " << out_path << "\n"
              << "  cached nodes: " << cache.cached_node_count() << " / "
              << graph.num_nodes() << "\n"
              << "  bytes used:   " << cache.bytes_used() << " of budget " << budget_bytes
              << "\n"
              << "  build reads:  " << io.bytes_read << " bytes\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::map<std::string, std::string>& over,
            const std::string& report_json, const std::string& report_csv) {
    RunConfig cfg = load_config(config_path);
    if (auto it = over.find("overlap"); it != over.end()) cfg.overlap = it->second == "on";
    if (auto it = over.find("feature-cache-entries"); it != over.end())
        cfg.feature_cache_entries = std::stoull(it->second);
    if (auto it = over.find("workers"); it != over.end())
        cfg.sampler_workers = static_cast<unsigned>(std::stoul(it->second));
    if (auto it = over.find("seed"); it != over.end()) cfg.seed = std::stoull(it->second);
    if (auto it = over.find("epochs"); it != over.end()) cfg.epochs = std::stoull(it->second);
    if (auto it = over.find("runtime-dir"); it != over.end()) cfg.runtime_dir = it->second;
    cfg.validate();

    RunReport r = run_training(cfg);
    write_report_json(report_json, cfg, r);
    write_report_csv(report_csv, r);

    double total = r.total_gather_misses() ? static_cast<double>(r.total_gather_misses()) /
                                                 static_cast<double>(r.total_accesses())
                                           : 0.0;
    std::cout << "run complete: " << r.superbatches.size() << " superbatches, "
              << r.total_accesses() << " feature accesses, miss ratio " << total << "\n"
              << "reports: " << report_json << ", " << report_csv << "\n";
    return 0;
}

int cmd_simulate(const std::string& trace_dir, const std::string& config_path,
                 const std::string& graph_path, std::vector<std::string> policies,
                 std::vector<std::string> capacities, const std::string& out_csv) {
    // Traces either live in a directory of ids files or are produced by
    // running the sample stage of a config.
    std::filesystem::path dir = trace_dir;
    std::filesystem::path scratch;
    if (trace_dir.empty()) {
        if (config_path.empty())
            throw std::invalid_argument("simulate needs --trace-dir or --config");
        RunConfig cfg = load_config(config_path);
        cfg.validate();
        GraphFile graph = GraphFile::open(cfg.graph_path);
        NeighborCache ncache;
        bool use_cache = cfg.use_neighbor_cache;
        if (use_cache) ncache = load_neighbor_cache(cfg.neighbor_cache_path);
        scratch = cfg.runtime_dir / "simulate_traces";
        std::filesystem::create_directories(scratch);
        TrainingRunner runner(cfg);
        SeedPlan plan =
            plan_seed_batches(runner.train_ids(), cfg.batch_size,
                              derive_seed(mix64(cfg.seed) ^ 0x45504F4348ULL, 0));
        std::size_t batches = std::min<std::size_t>(plan.batches.size(), cfg.superbatch_size);
        auto slice = std::span<const std::vector<NodeId>>(plan.batches).subspan(0, batches);
        superbatch_sample(graph, use_cache ? &ncache : nullptr, slice, cfg.fanouts, cfg.seed,
                          0, 0, scratch, cfg.sampler_workers);
        dir = scratch;
    }

    // Collect ids files grouped by superbatch index.
    std::map<std::uint64_t, std::map<std::uint64_t, std::filesystem::path>> groups;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        std::uint64_t sb, i;
        if (std::sscanf(name.c_str(), "ids_%" SCNu64 "_%" SCNu64 ".bin", &sb, &i) == 2)
            groups[sb][i] = e.path();
    }
    if (groups.empty()) throw std::runtime_error("no ids files found in " + dir.string());

    std::string gpath = graph_path;
    if (gpath.empty() && !config_path.empty())
        gpath = load_config(config_path).graph_path.string();
    if (gpath.empty()) throw std::invalid_argument("simulate needs --graph for node count");
    GraphFile graph = GraphFile::open(gpath);
    std::vector<std::uint64_t> out_degrees;

    if (policies.empty()) policies = {"belady", "static_degree", "lru", "none"};
    if (capacities.empty()) capacities = {"0.01", "0.02", "0.05", "0.10"};

    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot write csv: " + out_csv);
    out << "policy,capacity,miss_ratio\n";

    for (const auto& pname : policies) {
        CachePolicy policy = parse_policy(pname);
        if (policy == CachePolicy::static_degree && out_degrees.empty())
            out_degrees = graph.compute_out_degrees();
        for (const auto& cap_str : capacities) {
            double c = std::stod(cap_str);
            std::uint64_t entries =
                c < 1.0 ? static_cast<std::uint64_t>(c * static_cast<double>(graph.num_nodes()))
                        : static_cast<std::uint64_t>(c);
            std::uint64_t misses = 0, accesses = 0;
            for (auto& [sb, files] : groups) {
                FileTrace trace;
                for (auto& [i, p] : files) trace.files.push_back(p);
                auto r = simulate_policy(trace, graph.num_nodes(), entries, policy,
                                         out_degrees);
                misses += r.total_misses();
                accesses += r.total_accesses;
            }
            out << pname << ',' << entries << ','
                << (accesses ? static_cast<double>(misses) / static_cast<double>(accesses)
                             : 0.0)
                << "\n";
        }
    }
    if (!scratch.empty()) std::filesystem::remove_all(scratch);
    std::cout << "policy grid written to " << out_csv << "\n";
    return 0;
}

int cmd_report(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) throw std::runtime_error("cannot open report: " + report_path);
    json j = json::parse(in);
    const auto& t = j.at("totals");
    struct Row {
        const char* name;
        double ms;
    };
    Row rows[] = {
        {"inspect", t.at("inspect_ms").get<double>()},
        {"switch", t.at("switch_ms").get<double>()},
        {"data prep", t.at("data_prep_ms").get<double>()},
        {"cache update", t.at("cache_update_ms").get<double>()},
        {"compute", t.at("compute_ms").get<double>()},
    };
    double wall = t.at("wall_ms").get<double>();
    double sum = 0;
    for (auto& r : rows) sum += r.ms;

    std::printf("stage breakdown (%zu superbatches)\n", j.at("superbatches").size());
    std::printf("  %-14s %12s %8s\n", "category", "time (ms)", "share");
    for (auto& r : rows)
        std::printf("  %-14s %12.1f %7.1f%%\n", r.name, r.ms, wall > 0 ? 100.0 * r.ms / wall : 0.0);
    std::printf("  %-14s %12.1f %7.1f%%\n", "(sum)", sum, wall > 0 ? 100.0 * sum / wall : 0.0);
    std::printf("  %-14s %12.1f\n", "total wall", wall);
    std::printf("gather: %llu misses / %llu accesses, %llu pages read\n",
                static_cast<unsigned long long>(t.at("gather_misses").get<std::uint64_t>()),
                static_cast<unsigned long long>(t.at("accesses").get<std::uint64_t>()),
                static_cast<unsigned long long>(
                    t.at("gather_io").at("pages_read").get<std::uint64_t>()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"disk-based GNN data preparation engine with optimal feature caching"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic power-law dataset");
    std::uint64_t nodes = 0;
    double avg_degree = 15.0;
    std::uint32_t dim = 256;
    std::uint64_t seed = 1;
    std::string out_dir = "data";
    gen->add_option("--nodes", nodes, "number of nodes")->required()
        ->check(CLI::PositiveNumber);
    gen->add_option("--avg-degree", avg_degree, "average out-degree");
    gen->add_option("--dim", dim, "feature dimension")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--out", out_dir, "output directory");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "build and persist the neighbor cache");
    std::string graph_path, ncache_out = "ncache.bin";
    std::uint64_t budget = 0;
    pre->add_option("--graph", graph_path, "graph.bin path")->required();
    pre->add_option("--budget-bytes", budget, "total byte budget")->required();
    pre->add_option("--out", ncache_out, "output path");

    // run
    auto* run = app.add_subcommand("run", "execute the training pipeline");
    std::string config_path, report_json = "report.json", report_csv = "report.csv";
    std::map<std::string, std::string> over;
    std::string overlap_flag, fce_flag, workers_flag, seed_flag, epochs_flag, rtdir_flag;
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--overlap", overlap_flag, "on|off (overrides config)");
    run->add_option("--feature-cache-entries", fce_flag, "override feature cache entries");
    run->add_option("--workers", workers_flag, "override sampler workers");
    run->add_option("--seed", seed_flag, "override seed");
    run->add_option("--epochs", epochs_flag, "override epochs");
    run->add_option("--runtime-dir", rtdir_flag, "override runtime directory");
    run->add_option("--report-json", report_json, "JSON report path");
    run->add_option("--report-csv", report_csv, "CSV report path");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run cache policies over sampled traces");
    std::string trace_dir, sim_config, sim_graph, sim_csv = "missratio.csv";
    std::vector<std::string> policies, capacities;
    sim->add_option("--trace-dir", trace_dir, "directory of ids_{sb}_{i}.bin files");
    sim->add_option("--config", sim_config, "config to sample one superbatch from");
    sim->add_option("--graph", sim_graph, "graph.bin (node count and degrees)");
    sim->add_option("--policies", policies,
                    "policies: belady static_degree lru none")->delimiter(',');
    sim->add_option("--capacities", capacities,
                    "capacities: fraction of nodes (<1) or entry count")->delimiter(',');
    sim->add_option("--out", sim_csv, "output CSV path");

    // report
    auto* rep = app.add_subcommand("report", "print a stage-time summary of a report.json");
    std::string report_in;
    rep->add_option("--in", report_in, "report.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(nodes, avg_degree, dim, seed, out_dir);
        if (pre->parsed()) return cmd_preprocess(graph_path, budget, ncache_out);
        if (run->parsed()) {
            if (!overlap_flag.empty()) {
                if (overlap_flag != "on" && overlap_flag != "off")
                    throw std::invalid_argument("--overlap must be on or off");
                over["overlap"] = overlap_flag;
            }
            if (!fce_flag.empty()) over["feature-cache-entries"] = fce_flag;
            if (!workers_flag.empty()) over["workers"] = workers_flag;
            if (!seed_flag.empty()) over["seed"] = seed_flag;
            if (!epochs_flag.empty()) over["epochs"] = epochs_flag;
            if (!rtdir_flag.empty()) over["runtime-dir"] = rtdir_flag;
            return cmd_run(config_path, over, report_json, report_csv);
        }
        if (sim->parsed())
            return cmd_simulate(trace_dir, sim_config, sim_graph, policies, capacities,
                                sim_csv);
        if (rep->parsed()) return cmd_report(report_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
