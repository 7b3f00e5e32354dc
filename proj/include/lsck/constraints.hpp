#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "lsck/dataset.hpp"
#include "lsck/geometry.hpp"
#include "lsck/oracle.hpp"

namespace ckm {

struct MLSet {
    std::vector<Index> members;  // ascending, size >= 2
    bool hard = false;
    double diameter = 0.0;       // max pairwise Euclidean distance
    std::size_t level = 0;       // grid level that proposed it
    std::size_t query = 0;       // ordinal of the ML query that produced it
};

struct CLSet {
    std::vector<Index> members;   // growth order, 2 <= size <= k
    std::size_t queries = 0;      // membership queries spent growing this set
    std::size_t pair_probes = 0;  // C(|Y|,2) plus one per rejected candidate
};

struct ThresholdResult {
    double psi_pair = 0.0;  // max hard diameter for 2-point ML sets
    double psi_set = 0.0;   // max hard diameter for ML sets of size >= 3
    std::size_t probes_pair = 0;
    std::size_t probes_set = 0;
};

struct ConstraintCollection {
    std::vector<MLSet> ml_sets;
    std::vector<CLSet> cl_sets;
    LedgerTotals ledger;
    double psi_pair = 0.0;
    double psi_set = 0.0;
    /// Set by mix_constraints when the target ratio could not be reached.
    bool below_target = false;

    /// Number of distinct points appearing in at least one constraint.
    std::size_t constrained_count() const;
};

double set_diameter(const EmbeddedDataset& data, std::span<const Index> members);

/// Queries the oracle once per chunk of at most m_max points of every grid
/// cell and keeps each returned group of two or more texts as an ML set.
/// Chunks of one point are skipped. With workers > 1 queries run
/// concurrently; output order is the same either way.
std::vector<MLSet> generate_ml_sets(const EmbeddedDataset& data, Oracle& oracle, const GridPartition& grid,
                                    std::size_t m_max = 10, unsigned workers = 1);

struct ThresholdSearch {
    double value = 0.0;  // 0 when no candidate passes
    std::size_t probes = 0;
};

/// Largest value in the ascending list whose probe passes, assuming probes
/// are monotone (pass below the threshold, fail above).
ThresholdSearch binary_search_threshold(std::span<const double> ascending,
                                        const std::function<bool(double)>& probe);

/// Per arity class, binary search over the distinct candidate diameters with
/// an alpha-fold consistency probe on a candidate of that diameter.
ThresholdResult compute_hard_thresholds(const EmbeddedDataset& data, Oracle& oracle,
                                        std::span<const MLSet> candidates, int alpha_pair = 5,
                                        int alpha_set = 10);

void classify_hard_soft(std::span<MLSet> sets, const ThresholdResult& thresholds);

/// Grows cannot-link sets from uniformly sampled uncovered points at
/// Euclidean distance > radius from every current member.
std::vector<CLSet> generate_cl_sets(const EmbeddedDataset& data, Oracle& oracle, double radius, std::size_t k,
                                    std::uint64_t seed);

/// Random CL sets plus every ML set touching them until the fraction of
/// constrained points reaches target_ratio; tops up with ML sets if the CL
/// sets run out.
ConstraintCollection mix_constraints(std::span<const MLSet> ml_sets, std::span<const CLSet> cl_sets,
                                     double target_ratio, std::size_t n, std::uint64_t seed);

struct GenerationConfig {
    std::size_t k = 10;
    std::size_t m_max = 10;
    double eps = 0.1;
    int alpha_pair = 5;
    int alpha_set = 10;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// The full first stage: k-center, grid, ML sets, thresholds, CL sets.
ConstraintCollection generate_constraints(const EmbeddedDataset& data, Oracle& oracle, const GenerationConfig& config);

/// Query counts attributable to a (mixed) collection next to the pairwise
/// protocol needed for the same relations.
struct QueryComparison {
    std::uint64_t ml_queries = 0;           // distinct ML queries behind the selected ML sets
    std::uint64_t cl_queries = 0;           // membership queries behind the selected CL sets
    std::uint64_t consistency_queries = 0;  // threshold search, charged in full
    std::uint64_t pairwise_equivalent = 0;  // sum C(|X|,2) over ML + CL pair probes
    std::uint64_t total() const { return ml_queries + cl_queries + consistency_queries; }
    double reduction() const;
};

QueryComparison compare_queries(const ConstraintCollection& selected, std::uint64_t consistency_queries);

nlohmann::json to_json(const ConstraintCollection& c);
/// Validates indices against n; diameters are recomputed from data.
ConstraintCollection constraints_from_json(const nlohmann::json& j, const EmbeddedDataset& data);
void save_constraints(const std::filesystem::path& path, const ConstraintCollection& c);
ConstraintCollection load_constraints(const std::filesystem::path& path, const EmbeddedDataset& data);

}  // namespace ckm
