#include "lsck/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "lsck/error.hpp"
#include "lsck/metrics.hpp"
#include "lsck/rng.hpp"

namespace ckm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kAlgorithms{"lsck_hc", "lsck", "kmeanspp", "lsck_hc_hard"};

const char* distance_name(DistanceKind kind) { return kind == DistanceKind::squared ? "squared" : "euclidean"; }

DistanceKind parse_distance(const std::string& s) {
    if (s == "squared") return DistanceKind::squared;
    if (s == "euclidean") return DistanceKind::euclidean;
    throw Error("config: distance must be squared or euclidean, got " + s);
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    // "-0.0000" and "0.0000" must print the same.
    if (std::string(buf) == "-0.0000") return "0.0000";
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

template <typename T>
void take(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw Error("config: " + where + " must be an object");
    for (const auto& [k, _] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
            throw Error("config: unknown key " + where + "." + k);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!synthetic && (corpus.empty() || embeddings.empty()))
        throw Error("config: need corpus and embeddings, or a synthetic spec");
    if (k < 2) throw Error("config: k must be >= 2");
    if (algorithms.empty()) throw Error("config: algorithms is empty");
    for (const auto& a : algorithms)
        if (!kAlgorithms.count(a)) throw Error("config: unknown algorithm " + a);
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw Error("config: ratios must lie in [0, 1]");
    if (seeds.empty()) throw Error("config: seeds is empty");
    if (penalties && (penalties->w_m < 0 || penalties->w_cl < 0)) throw Error("config: penalties must be >= 0");
    if (oracle.backend != "sim" && oracle.backend != "remote")
        throw Error("config: oracle backend must be sim or remote");
    if (!(oracle.error_rate >= 0.0 && oracle.error_rate <= 1.0)) throw Error("config: error_rate must lie in [0, 1]");
    if (convergence.max_iters < 1) throw Error("config: max_iters must be >= 1");
    if (workers < 1) throw Error("config: workers must be >= 1");
}

json to_json(const ExperimentConfig& c) {
    json j;
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        j["synthetic"] = {{"k_true", s.k_true}, {"n", s.n}, {"dim", s.dim}, {"separation", s.separation}, {"seed", s.seed}};
    } else {
        j["corpus"] = c.corpus.generic_string();
        j["embeddings"] = c.embeddings.generic_string();
    }
    j["k"] = c.k;
    j["algorithms"] = c.algorithms;
    j["ratios"] = c.ratios;
    j["seeds"] = c.seeds;
    if (c.penalties)
        j["penalties"] = {{"w_m", c.penalties->w_m}, {"w_cl", c.penalties->w_cl}};
    else
        j["penalties"] = "auto";
    j["distance"] = distance_name(c.distance);
    j["convergence"] = {{"tol", c.convergence.tol}, {"max_iters", c.convergence.max_iters}};
    j["oracle"] = {{"backend", c.oracle.backend},
                   {"error_rate", c.oracle.error_rate},
                   {"seed", c.oracle.seed},
                   {"model", c.oracle.model},
                   {"max_in_flight", c.oracle.max_in_flight}};
    j["generation"] = {{"m_max", c.generation.m_max},
                       {"eps", c.generation.eps},
                       {"alpha_pair", c.generation.alpha_pair},
                       {"alpha_set", c.generation.alpha_set},
                       {"seed", c.generation.seed},
                       {"workers", c.generation.workers}};
    j["constraints"] = c.constraints.generic_string();
    j["output_dir"] = c.output_dir.generic_string();
    j["workers"] = c.workers;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        reject_unknown(j,
                       {"synthetic", "corpus", "embeddings", "k", "algorithms", "ratios", "seeds", "penalties",
                        "distance", "convergence", "oracle", "generation", "constraints", "output_dir", "workers"},
                       "config");
        if (j.contains("synthetic")) {
            const auto& s = j.at("synthetic");
            reject_unknown(s, {"k_true", "n", "dim", "separation", "seed"}, "synthetic");
            SyntheticSpec spec;
            take(s, "k_true", spec.k_true);
            take(s, "n", spec.n);
            take(s, "dim", spec.dim);
            take(s, "separation", spec.separation);
            take(s, "seed", spec.seed);
            c.synthetic = spec;
        }
        if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
        if (j.contains("embeddings")) c.embeddings = j.at("embeddings").get<std::string>();
        take(j, "k", c.k);
        take(j, "algorithms", c.algorithms);
        take(j, "ratios", c.ratios);
        take(j, "seeds", c.seeds);
        if (j.contains("penalties")) {
            const auto& p = j.at("penalties");
            if (p.is_string()) {
                if (p.get<std::string>() != "auto") throw Error("config: penalties must be \"auto\" or an object");
                c.penalties.reset();
            } else {
                reject_unknown(p, {"w_m", "w_cl"}, "penalties");
                Penalties pen;
                take(p, "w_m", pen.w_m);
                take(p, "w_cl", pen.w_cl);
                c.penalties = pen;
            }
        }
        if (j.contains("distance")) c.distance = parse_distance(j.at("distance").get<std::string>());
        if (j.contains("convergence")) {
            const auto& v = j.at("convergence");
            reject_unknown(v, {"tol", "max_iters"}, "convergence");
            take(v, "tol", c.convergence.tol);
            take(v, "max_iters", c.convergence.max_iters);
        }
        if (j.contains("oracle")) {
            const auto& o = j.at("oracle");
            reject_unknown(o, {"backend", "error_rate", "seed", "model", "max_in_flight"}, "oracle");
            take(o, "backend", c.oracle.backend);
            take(o, "error_rate", c.oracle.error_rate);
            take(o, "seed", c.oracle.seed);
            take(o, "model", c.oracle.model);
            take(o, "max_in_flight", c.oracle.max_in_flight);
        }
        if (j.contains("generation")) {
            const auto& g = j.at("generation");
            reject_unknown(g, {"m_max", "eps", "alpha_pair", "alpha_set", "seed", "workers"}, "generation");
            take(g, "m_max", c.generation.m_max);
            take(g, "eps", c.generation.eps);
            take(g, "alpha_pair", c.generation.alpha_pair);
            take(g, "alpha_set", c.generation.alpha_set);
            take(g, "seed", c.generation.seed);
            take(g, "workers", c.generation.workers);
        }
        if (j.contains("constraints")) c.constraints = j.at("constraints").get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        take(j, "workers", c.workers);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

EmbeddedDataset load_experiment_dataset(const ExperimentConfig& config) {
    if (config.synthetic) return generate_synthetic(*config.synthetic);
    return load_dataset(config.corpus, config.embeddings);
}

std::unique_ptr<Oracle> make_oracle(const ExperimentConfig& config, const EmbeddedDataset& data) {
    if (config.oracle.backend == "sim") {
        if (!data.has_labels()) throw Error("sim oracle needs a labeled dataset");
        return std::make_unique<SimOracle>(data.labels(), SimOracleConfig{config.oracle.error_rate, config.oracle.seed});
    }
    auto rc = RemoteOracleConfig::from_env(config.oracle.model);
    rc.max_in_flight = config.oracle.max_in_flight;
    return std::make_unique<RemoteOracle>(rc);
}

ConstraintCollection cmd_gen_constraints(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const auto data = load_experiment_dataset(config);
    auto oracle = make_oracle(config, data);
    auto gen = config.generation;
    gen.k = config.k;

    const fs::path transcript = config.constraints.string() + ".transcript.jsonl";
    if (config.constraints.has_parent_path()) fs::create_directories(config.constraints.parent_path());
    ConstraintCollection out;
    try {
        out = generate_constraints(data, *oracle, gen);
    } catch (const std::exception& e) {
        oracle->ledger().write_transcript(transcript);
        throw Error(std::string(e.what()) + " (transcript: " + transcript.string() + ")");
    }
    save_constraints(config.constraints, out);
    oracle->ledger().write_transcript(transcript);

    std::size_t hard = 0;
    for (const auto& x : out.ml_sets) hard += x.hard;
    log << "ml sets:     " << out.ml_sets.size() << " (" << hard << " hard)\n"
        << "cl sets:     " << out.cl_sets.size() << '\n'
        << "queries:     ml " << out.ledger.ml_queries << ", cl " << out.ledger.cl_queries << ", consistency "
        << out.ledger.consistency_queries << ", total " << out.ledger.total() << '\n'
        << "psi_pair:    " << out.psi_pair << '\n'
        << "psi_set:     " << out.psi_set << '\n'
        << "wrote " << config.constraints.string() << '\n';
    return out;
}

std::string result_name(const std::string& algorithm, double ratio, std::uint64_t seed) {
    return algorithm + "_r" + fmt4(ratio) + "_s" + std::to_string(seed) + ".json";
}

namespace {

struct Cell {
    std::string algorithm;
    double ratio = 0.0;
    std::uint64_t seed = 0;
};

json centers_json(const CenterSet& c) {
    json out = json::array();
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto row = c[i];
        out.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return out;
}

json metrics_json(std::span<const int> pred, std::span<const int> truth) {
    return {{"acc", acc_hungarian(pred, truth)},
            {"nmi", nmi(pred, truth)},
            {"ri", rand_index(pred, truth)},
            {"ari", ari(pred, truth)}};
}

}  // namespace

std::vector<fs::path> cmd_cluster(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const auto data = load_experiment_dataset(config);
    const bool constrained = std::any_of(config.algorithms.begin(), config.algorithms.end(),
                                         [](const std::string& a) { return a != "kmeanspp"; });
    ConstraintCollection all;
    if (constrained) all = load_constraints(config.constraints, data);
    std::optional<std::vector<int>> truth;
    if (data.has_labels()) truth = data.labels();

    std::vector<Cell> cells;
    for (const auto& a : config.algorithms) {
        if (a == "kmeanspp") {
            for (auto s : config.seeds) cells.push_back({a, 0.0, s});
            continue;
        }
        for (double r : config.ratios)
            for (auto s : config.seeds) cells.push_back({a, r, s});
    }
    fs::create_directories(config.output_dir);
    const json echo = to_json(config);

    std::vector<fs::path> written(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mu;
    std::exception_ptr failure;

    auto run_cell = [&](const Cell& cell) -> fs::path {
        const auto t0 = std::chrono::steady_clock::now();
        json meta;
        ClusteringResult res;
        ConstraintCollection mixed;
        if (cell.algorithm == "kmeanspp") {
            res = kmeans_baseline(data, config.k, cell.seed, config.convergence);
        } else {
            std::uint64_t ratio_bits;
            std::memcpy(&ratio_bits, &cell.ratio, sizeof ratio_bits);
            mixed = mix_constraints(all.ml_sets, all.cl_sets, cell.ratio, data.size(),
                                    hash_combine(cell.seed, ratio_bits));
            ClusterOptions opt;
            opt.k = config.k;
            opt.seed = cell.seed;
            opt.distance = config.distance;
            opt.convergence = config.convergence;
            if (cell.algorithm == "lsck_hc_hard")
                opt.penalties = {kHardPenalty, kHardPenalty};
            else if (config.penalties)
                opt.penalties = *config.penalties;
            else
                opt.penalties = auto_penalties(data, config.k, cell.seed, config.distance, config.convergence);
            res = cell.algorithm == "lsck" ? lsck(data, mixed, opt) : lsck_hc(data, mixed, opt);
            meta["penalties"] = {{"w_m", opt.penalties.w_m}, {"w_cl", opt.penalties.w_cl}};
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const auto cmp = compare_queries(mixed, mixed.ml_sets.empty() && mixed.cl_sets.empty()
                                                    ? 0
                                                    : all.ledger.consistency_queries);
        std::size_t hard = 0;
        for (const auto& x : mixed.ml_sets) hard += x.hard;
        json j;
        j["assignment"] = res.assignment;
        j["centers"] = centers_json(res.centers);
        j["objective"] = res.objective;
        j["iterations"] = res.iterations;
        j["converged"] = res.converged;
        j["seed"] = cell.seed;
        j["algorithm"] = cell.algorithm;
        j["ratio"] = cell.ratio;
        j["config"] = echo;
        j["run"] = meta;
        j["diagnostics"] = {{"objective_history", res.objective_history},
                            {"gy_checks", res.local_search.gy_checks},
                            {"gy_violations", res.local_search.gy_violations},
                            {"removals", res.local_search.removals},
                            {"commits", res.local_search.commits},
                            {"ml_merges", res.ml_merges},
                            {"degenerate_seeding", res.degenerate_seeding}};
        j["constraints"] = {{"ml_sets", mixed.ml_sets.size()},
                            {"hard_ml_sets", hard},
                            {"cl_sets", mixed.cl_sets.size()},
                            {"constrained_points", mixed.constrained_count()},
                            {"below_target", mixed.below_target},
                            {"ml_queries", cmp.ml_queries},
                            {"cl_queries", cmp.cl_queries},
                            {"consistency_queries", cmp.consistency_queries},
                            {"fsc_equiv_queries", cmp.pairwise_equivalent}};
        if (truth) {
            j["metrics"] = metrics_json(res.assignment, *truth);
            j["constraints"]["constraint_ri"] = constraint_ri(mixed, *truth);
        }
        const auto path = config.output_dir / result_name(cell.algorithm, cell.ratio, cell.seed);
        write_text(path, j.dump(1) + "\n");
        fs::path time_path = path;
        time_path.replace_extension(".time");
        write_text(time_path, json{{"wall_seconds", wall}}.dump() + "\n");
        {
            std::lock_guard lock(log_mu);
            log << path.filename().string();
            if (truth) log << "  acc " << fmt4(j["metrics"]["acc"].get<double>());
            log << "  iters " << res.iterations << '\n';
        }
        return path;
    };

    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
            try {
                written[i] = run_cell(cells[i]);
            } catch (...) {
                std::lock_guard lock(log_mu);
                if (!failure) failure = std::current_exception();
                next = cells.size();
            }
        }
    };
    const unsigned n_threads = std::min<std::size_t>(config.workers, std::max<std::size_t>(cells.size(), 1));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return written;
}

json evaluate_result(const json& result, const EmbeddedDataset& data) {
    if (!data.has_labels()) throw Error("evaluate: dataset has no labels");
    std::vector<int> pred;
    try {
        pred = result.at("assignment").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw Error(std::string("evaluate: ") + e.what());
    }
    if (pred.size() != data.size()) throw Error("evaluate: assignment length does not match the dataset");
    const auto truth = data.labels();
    return metrics_json(pred, truth);
}

json evaluate_constraints(const ConstraintCollection& constraints, const EmbeddedDataset& data) {
    if (!data.has_labels()) throw Error("evaluate: dataset has no labels");
    const auto truth = data.labels();
    const auto counts = constraint_pair_counts(constraints, truth);
    return {{"constraint_ri", constraint_ri(constraints, truth)},
            {"consistent_pairs", counts.consistent},
            {"total_pairs", counts.total},
            {"ml_sets", constraints.ml_sets.size()},
            {"cl_sets", constraints.cl_sets.size()},
            {"constrained_points", constraints.constrained_count()}};
}

namespace {

struct Stat {
    double mean = 0.0;
    double stddev = 0.0;
};

// Sample standard deviation; 0 for a single value.
Stat summarize(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

const std::vector<std::string> kMetricOrder{"acc", "nmi", "ri", "ari", "objective", "iterations"};

}  // namespace

RunReport build_report(const fs::path& dir) {
    RunReport report;
    if (!fs::is_directory(dir)) throw Error("report: not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    // (algorithm, ratio) -> metric -> per-seed values
    std::map<std::pair<std::string, double>, std::map<std::string, std::vector<double>>> groups;
    std::map<std::pair<std::string, double>, std::set<std::uint64_t>> group_seeds;
    // ratio -> seed -> query fields (identical across constrained algorithms)
    std::map<double, std::map<std::uint64_t, json>> query_cells;

    for (const auto& f : files) {
        json j;
        try {
            std::ifstream in(f);
            in >> j;
            const auto alg = j.at("algorithm").get<std::string>();
            const auto ratio = j.at("ratio").get<double>();
            const auto seed = j.at("seed").get<std::uint64_t>();
            const auto key = std::make_pair(alg, ratio);
            if (!group_seeds[key].insert(seed).second) {
                report.warnings.push_back(f.filename().string() + ": duplicate seed, skipped");
                continue;
            }
            auto& g = groups[key];
            if (j.contains("metrics"))
                for (const char* m : {"acc", "nmi", "ri", "ari"}) g[m].push_back(j["metrics"].at(m).get<double>());
            else
                report.warnings.push_back(f.filename().string() + ": no metrics (unlabeled data)");
            g["objective"].push_back(j.at("objective").get<double>());
            g["iterations"].push_back(j.at("iterations").get<double>());
            if (alg != "kmeanspp" && j.contains("constraints") && !query_cells[ratio].count(seed))
                query_cells[ratio][seed] = j.at("constraints");
        } catch (const std::exception& e) {
            report.warnings.push_back(f.filename().string() + ": unreadable result (" + e.what() + ")");
        }
    }

    std::size_t max_seeds = 0;
    for (const auto& [key, seeds] : group_seeds) max_seeds = std::max(max_seeds, seeds.size());
    for (const auto& [key, metrics] : groups) {
        const auto n = group_seeds[key].size();
        if (n < max_seeds)
            report.warnings.push_back(key.first + " at ratio " + fmt4(key.second) + ": " + std::to_string(n) + " of " +
                                      std::to_string(max_seeds) + " seeds");
        for (const auto& name : kMetricOrder) {
            auto it = metrics.find(name);
            if (it == metrics.end()) continue;
            const auto s = summarize(it->second);
            report.metrics.push_back({key.first, key.second, name, s.mean, s.stddev, it->second.size()});
        }
    }

    for (const auto& [ratio, seeds] : query_cells) {
        QueryRow row;
        row.ratio = ratio;
        row.n_seeds = seeds.size();
        std::vector<double> ri;
        for (const auto& [seed, q] : seeds) {
            if (q.contains("constraint_ri")) ri.push_back(q["constraint_ri"].get<double>());
            row.ml_queries += q.at("ml_queries").get<double>();
            row.cl_queries += q.at("cl_queries").get<double>();
            row.consistency_queries += q.at("consistency_queries").get<double>();
            row.fsc_equiv_queries += q.at("fsc_equiv_queries").get<double>();
        }
        const auto n = static_cast<double>(seeds.size());
        row.ml_queries /= n;
        row.cl_queries /= n;
        row.consistency_queries /= n;
        row.fsc_equiv_queries /= n;
        row.total_queries = row.ml_queries + row.cl_queries + row.consistency_queries;
        row.reduction = row.total_queries > 0 ? row.fsc_equiv_queries / row.total_queries : 0.0;
        row.constraint_ri = summarize(ri).mean;
        report.queries.push_back(row);
    }
    return report;
}

std::string metrics_csv(const RunReport& report) {
    std::ostringstream out;
    out << "algorithm,ratio,metric,mean,stddev,n_seeds\n";
    for (const auto& r : report.metrics)
        out << r.algorithm << ',' << fmt4(r.ratio) << ',' << r.metric << ',' << fmt4(r.mean) << ',' << fmt4(r.stddev)
            << ',' << r.n_seeds << '\n';
    return out.str();
}

std::string queries_csv(const RunReport& report) {
    std::ostringstream out;
    out << "ratio,constraint_ri,ml_queries,cl_queries,consistency_queries,total_queries,fsc_equiv_queries,"
           "reduction,n_seeds\n";
    for (const auto& q : report.queries)
        out << fmt4(q.ratio) << ',' << fmt4(q.constraint_ri) << ',' << fmt4(q.ml_queries) << ',' << fmt4(q.cl_queries)
            << ',' << fmt4(q.consistency_queries) << ',' << fmt4(q.total_queries) << ',' << fmt4(q.fsc_equiv_queries)
            << ',' << fmt4(q.reduction) << ',' << q.n_seeds << '\n';
    return out.str();
}

RunReport cmd_report(const fs::path& dir, std::ostream& log) {
    auto report = build_report(dir);
    write_text(dir / "report.csv", metrics_csv(report));
    write_text(dir / "queries.csv", queries_csv(report));
    for (const auto& w : report.warnings) log << "warning: " << w << '\n';
    for (const auto& r : report.metrics)
        if (r.metric == "acc")
            log << r.algorithm << " ratio " << fmt4(r.ratio) << "  acc " << fmt4(r.mean) << " +- " << fmt4(r.stddev)
                << "  (" << r.n_seeds << " seeds)\n";
    for (const auto& q : report.queries)
        log << "ratio " << fmt4(q.ratio) << "  queries " << fmt4(q.total_queries) << "  pairwise "
            << fmt4(q.fsc_equiv_queries) << "  reduction " << fmt4(q.reduction) << "x\n";
    log << "wrote " << (dir / "report.csv").string() << " and " << (dir / "queries.csv").string() << '\n';
    return report;
}

}  // namespace ckm
