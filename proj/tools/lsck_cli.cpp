#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsck/error.hpp"
#include "lsck/harness.hpp"

using namespace ckm;

namespace {

// Every flag is optional so that an explicit flag can override --config.
struct Flags {
    std::string config;

    std::optional<std::string> corpus, embeddings;
    std::optional<int> synth_k;
    std::optional<std::size_t> synth_n, synth_dim;
    std::optional<double> synth_separation;
    std::optional<std::uint64_t> synth_seed;

    std::optional<std::size_t> k;

    std::optional<std::string> oracle, model;
    std::optional<double> error_rate;
    std::optional<std::uint64_t> oracle_seed;
    std::optional<int> max_in_flight;

    std::optional<std::size_t> m_max;
    std::optional<double> eps;
    std::optional<int> alpha_pair, alpha_set;
    std::optional<std::uint64_t> gen_seed;
    std::optional<unsigned> gen_workers;

    std::optional<std::string> constraints, output_dir;
    std::vector<std::string> algorithms;
    std::vector<double> ratios;
    std::vector<std::uint64_t> seeds;
    std::optional<std::string> penalties;
    std::optional<double> w_m, w_cl;
    std::optional<std::string> distance;
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::optional<unsigned> workers;
};

void add_dataset(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run file; explicit flags override it");
    app->add_option("--corpus", f.corpus, "JSONL corpus");
    app->add_option("--embeddings", f.embeddings, "EMB1 embedding file");
    app->add_option("--synth-k", f.synth_k, "synthetic dataset: number of blobs");
    app->add_option("--synth-n", f.synth_n, "synthetic dataset: points");
    app->add_option("--synth-dim", f.synth_dim, "synthetic dataset: dimension");
    app->add_option("--synth-separation", f.synth_separation, "synthetic dataset: center spacing");
    app->add_option("--synth-seed", f.synth_seed, "synthetic dataset: seed");
}

void add_generation(CLI::App* app, Flags& f) {
    app->add_option("-k,--k", f.k, "number of clusters");
    app->add_option("--oracle", f.oracle, "sim or remote")->check(CLI::IsMember({"sim", "remote"}));
    app->add_option("--error-rate", f.error_rate, "sim oracle flip probability")->check(CLI::Range(0.0, 1.0));
    app->add_option("--oracle-seed", f.oracle_seed, "sim oracle seed");
    app->add_option("--model", f.model, "remote oracle model name");
    app->add_option("--max-in-flight", f.max_in_flight, "remote oracle concurrent requests");
    app->add_option("--m-max", f.m_max, "texts per ML query");
    app->add_option("--eps", f.eps, "grid level growth");
    app->add_option("--alpha-pair", f.alpha_pair, "consistency repeats for 2-point sets");
    app->add_option("--alpha-set", f.alpha_set, "consistency repeats for larger sets");
    app->add_option("--seed", f.gen_seed, "generation seed");
    app->add_option("--query-workers", f.gen_workers, "concurrent ML queries");
    app->add_option("-o,--out", f.constraints, "constraint file to write");
}

void add_clustering(CLI::App* app, Flags& f) {
    app->add_option("-k,--k", f.k, "number of clusters");
    app->add_option("--constraints", f.constraints, "constraint file");
    app->add_option("--algorithms", f.algorithms, "lsck_hc, lsck, kmeanspp, lsck_hc_hard")
        ->delimiter(',')
        ->check(CLI::IsMember({"lsck_hc", "lsck", "kmeanspp", "lsck_hc_hard"}));
    app->add_option("--ratios", f.ratios, "constraint ratios")->delimiter(',')->check(CLI::Range(0.0, 1.0));
    app->add_option("--seeds", f.seeds, "run seeds")->delimiter(',');
    app->add_option("--penalties", f.penalties, "auto, or use --w-m/--w-cl")->check(CLI::IsMember({"auto"}));
    app->add_option("--w-m", f.w_m, "ML penalty")->check(CLI::NonNegativeNumber);
    app->add_option("--w-cl", f.w_cl, "CL penalty")->check(CLI::NonNegativeNumber);
    app->add_option("--distance", f.distance, "squared or euclidean")
        ->check(CLI::IsMember({"squared", "euclidean"}));
    app->add_option("--tol", f.tol, "center shift tolerance; negative = data-scaled default");
    app->add_option("--max-iters", f.max_iters, "outer iteration cap");
    app->add_option("--out-dir", f.output_dir, "result directory");
    app->add_option("-j,--workers", f.workers, "concurrent runs");
}

template <typename T, typename U>
void set(const std::optional<T>& v, U& into) {
    if (v) into = *v;
}

ExperimentConfig resolve(const Flags& f) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    if (f.corpus || f.embeddings) c.synthetic.reset();
    set(f.corpus, c.corpus);
    set(f.embeddings, c.embeddings);
    if (f.synth_k || f.synth_n || f.synth_dim || f.synth_separation || f.synth_seed) {
        auto s = c.synthetic.value_or(SyntheticSpec{10, 1000, 16, 3.0, 0});
        set(f.synth_k, s.k_true);
        set(f.synth_n, s.n);
        set(f.synth_dim, s.dim);
        set(f.synth_separation, s.separation);
        set(f.synth_seed, s.seed);
        c.synthetic = s;
    }
    set(f.k, c.k);
    set(f.oracle, c.oracle.backend);
    set(f.error_rate, c.oracle.error_rate);
    set(f.oracle_seed, c.oracle.seed);
    set(f.model, c.oracle.model);
    set(f.max_in_flight, c.oracle.max_in_flight);
    set(f.m_max, c.generation.m_max);
    set(f.eps, c.generation.eps);
    set(f.alpha_pair, c.generation.alpha_pair);
    set(f.alpha_set, c.generation.alpha_set);
    set(f.gen_seed, c.generation.seed);
    set(f.gen_workers, c.generation.workers);
    set(f.constraints, c.constraints);
    set(f.output_dir, c.output_dir);
    if (!f.algorithms.empty()) c.algorithms = f.algorithms;
    if (!f.ratios.empty()) c.ratios = f.ratios;
    if (!f.seeds.empty()) c.seeds = f.seeds;
    if (f.penalties) c.penalties.reset();
    if (f.w_m || f.w_cl) {
        auto p = c.penalties.value_or(Penalties{});
        set(f.w_m, p.w_m);
        set(f.w_cl, p.w_cl);
        c.penalties = p;
    }
    if (f.distance) c.distance = *f.distance == "squared" ? DistanceKind::squared : DistanceKind::euclidean;
    set(f.tol, c.convergence.tol);
    set(f.max_iters, c.convergence.max_iters);
    set(f.workers, c.workers);
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained k-means with set-level oracle constraints"};
    app.require_subcommand(1);

    SyntheticSpec spec{10, 1000, 16, 3.0, 0};
    std::string synth_corpus = "corpus.jsonl", synth_emb = "embeddings.emb";
    auto* synth = app.add_subcommand("synth", "write a synthetic labeled corpus and its embeddings");
    synth->add_option("--k-true", spec.k_true, "blobs")->check(CLI::PositiveNumber);
    synth->add_option("--n", spec.n, "points")->check(CLI::PositiveNumber);
    synth->add_option("--dim", spec.dim, "dimension")->check(CLI::PositiveNumber);
    synth->add_option("--separation", spec.separation, "center spacing in standard deviations");
    synth->add_option("--seed", spec.seed, "seed");
    synth->add_option("--corpus", synth_corpus, "output JSONL corpus");
    synth->add_option("--embeddings", synth_emb, "output EMB1 file");

    Flags gen_flags;
    auto* gen = app.add_subcommand("gen-constraints", "query the oracle and write a constraint file");
    add_dataset(gen, gen_flags);
    add_generation(gen, gen_flags);

    Flags cl_flags;
    auto* cluster = app.add_subcommand("cluster", "run algorithms over ratios and seeds");
    add_dataset(cluster, cl_flags);
    add_clustering(cluster, cl_flags);

    Flags ev_flags;
    std::string ev_result;
    auto* evaluate = app.add_subcommand("evaluate", "metrics of a result file or constraint RI of a constraint file");
    add_dataset(evaluate, ev_flags);
    evaluate->add_option("--result", ev_result, "result JSON");
    evaluate->add_option("--constraints", ev_flags.constraints, "constraint file");

    Flags rep_flags;
    std::optional<std::string> rep_dir;
    auto* report = app.add_subcommand("report", "aggregate result files into CSV");
    report->add_option("--config", rep_flags.config, "JSON run file (uses its output_dir)");
    report->add_option("dir,--results", rep_dir, "result directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto data = generate_synthetic(spec);
            write_corpus(synth_corpus, data.records());
            write_embeddings(synth_emb, data);
            std::cout << "wrote " << synth_corpus << " and " << synth_emb << " (n " << data.size() << ", dim "
                      << data.dim() << ")\n";
        } else if (gen->parsed()) {
            cmd_gen_constraints(resolve(gen_flags), std::cout);
        } else if (cluster->parsed()) {
            const auto written = cmd_cluster(resolve(cl_flags), std::cout);
            std::cout << "wrote " << written.size() << " result files\n";
        } else if (evaluate->parsed()) {
            const auto cfg = resolve(ev_flags);
            const auto data = load_experiment_dataset(cfg);
            nlohmann::json out;
            if (!ev_result.empty()) {
                std::ifstream in(ev_result);
                if (!in) throw Error("cannot open " + ev_result);
                nlohmann::json r;
                try {
                    in >> r;
                } catch (const nlohmann::json::exception& e) {
                    throw Error(ev_result + ": " + e.what());
                }
                out["result"] = evaluate_result(r, data);
            }
            if (ev_flags.constraints || ev_result.empty())
                out["constraints"] = evaluate_constraints(load_constraints(cfg.constraints, data), data);
            std::cout << out.dump(2) << '\n';
        } else if (report->parsed()) {
            std::filesystem::path dir;
            if (rep_dir)
                dir = *rep_dir;
            else if (!rep_flags.config.empty())
                dir = load_config(rep_flags.config).output_dir;
            else
                dir = ExperimentConfig{}.output_dir;
            cmd_report(dir, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
