#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsck/clustering.hpp"
#include "lsck/constraints.hpp"
#include "lsck/dataset.hpp"
#include "lsck/oracle.hpp"

namespace ckm {

struct OracleSettings {
    std::string backend = "sim";  // "sim" or "remote"
    double error_rate = 0.0;
    std::uint64_t seed = 0;
    std::string model = "gpt-4o-mini";
    int max_in_flight = 4;
};

struct ExperimentConfig {
    // Either corpus + embeddings, or a synthetic spec.
    std::filesystem::path corpus;
    std::filesystem::path embeddings;
    std::optional<SyntheticSpec> synthetic;

    std::size_t k = 10;
    // lsck_hc, lsck, kmeanspp, or lsck_hc_hard (lsck_hc with w -> infinity).
    std::vector<std::string> algorithms{"lsck_hc"};
    std::vector<double> ratios{0.1, 0.2, 0.4};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::optional<Penalties> penalties;  // nullopt = auto
    DistanceKind distance = DistanceKind::squared;
    Convergence convergence;

    OracleSettings oracle;
    GenerationConfig generation;

    std::filesystem::path constraints = "constraints.json";
    std::filesystem::path output_dir = "results";
    unsigned workers = 1;

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Penalty used for the hard-enforcement ablation.
inline constexpr double kHardPenalty = 1e12;

EmbeddedDataset load_experiment_dataset(const ExperimentConfig& config);
std::unique_ptr<Oracle> make_oracle(const ExperimentConfig& config, const EmbeddedDataset& data);

/// Stage 1. Writes the constraint file and a transcript next to it
/// (<constraints>.transcript.jsonl), prints ledger totals and thresholds.
ConstraintCollection cmd_gen_constraints(const ExperimentConfig& config, std::ostream& log);

/// Stage 2. One result file per (algorithm, ratio, seed) in output_dir, plus a
/// .time sidecar with the wall time. kmeanspp runs once per seed at ratio 0.
std::vector<std::filesystem::path> cmd_cluster(const ExperimentConfig& config, std::ostream& log);

std::string result_name(const std::string& algorithm, double ratio, std::uint64_t seed);

/// Metrics for a result file (assignment vs labels) or, given a constraint
/// file, its constraint RI.
nlohmann::json evaluate_result(const nlohmann::json& result, const EmbeddedDataset& data);
nlohmann::json evaluate_constraints(const ConstraintCollection& constraints, const EmbeddedDataset& data);

struct MetricRow {
    std::string algorithm;
    double ratio = 0.0;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n_seeds = 0;
};

struct QueryRow {
    double ratio = 0.0;
    double constraint_ri = 0.0;
    double ml_queries = 0.0;
    double cl_queries = 0.0;
    double consistency_queries = 0.0;
    double total_queries = 0.0;
    double fsc_equiv_queries = 0.0;
    double reduction = 0.0;
    std::size_t n_seeds = 0;
};

struct RunReport {
    std::vector<MetricRow> metrics;
    std::vector<QueryRow> queries;
    std::vector<std::string> warnings;
};

/// Aggregates every result file in dir. Unreadable files and groups with
/// fewer seeds than their peers become warnings.
RunReport build_report(const std::filesystem::path& dir);
/// Writes <dir>/report.csv and <dir>/queries.csv and prints a summary.
RunReport cmd_report(const std::filesystem::path& dir, std::ostream& log);

std::string metrics_csv(const RunReport& report);
std::string queries_csv(const RunReport& report);

}  // namespace ckm
