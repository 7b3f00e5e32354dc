#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lsck/constraints.hpp"
#include "lsck/dataset.hpp"
#include "lsck/geometry.hpp"

namespace ckm {

/// Distance used in penalty, merge, matching and g_y terms. The k-means
/// objective itself is always squared Euclidean.
enum class DistanceKind { squared, euclidean };

double distance(DistanceKind kind, std::span<const double> a, std::span<const double> b);

struct Penalties {
    double w_m = 0.0;   // per point of a split soft ML set
    double w_cl = 0.0;  // per point whose center changes in a CL set
};

struct Convergence {
    /// Stop once the largest squared center displacement is below tol.
    /// Negative means 1e-4 * (bounding-box diagonal)^2.
    double tol = -1.0;
    int max_iters = 100;
};

/// Points with multiplicities, stored row-major.
class WeightedPoints {
public:
    explicit WeightedPoints(std::size_t dim) : dim_(dim) {}

    void add(std::span<const double> coords, double weight);
    std::size_t size() const { return weights_.size(); }
    std::size_t dim() const { return dim_; }
    std::span<const double> operator[](std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    double weight(std::size_t i) const { return weights_[i]; }

private:
    std::size_t dim_;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

struct SeedResult {
    CenterSet centers;
    /// True when fewer than k distinct points carried mass and centers had to
    /// be drawn with repetition.
    bool degenerate = false;
};

/// D^2 sampling with probability proportional to weight * (squared distance
/// to the nearest chosen center); the first center proportional to weight.
SeedResult kmeanspp_seed(const WeightedPoints& points, std::size_t k, std::uint64_t seed);

/// One group of points that is assigned to a center as a block.
struct MLGroup {
    std::vector<Index> members;  // ascending
    bool hard = false;
    std::size_t source = 0;      // index of the ML set it came from
};

struct MLClusterResult {
    std::vector<MLGroup> groups;
    CenterSet centers;
    bool degenerate_seeding = false;
    std::size_t merges = 0;
};

/// Seeds with hard ML mass centers (weight |X|) plus all other points, splits
/// each soft ML set by nearest center and merges partitions while the
/// penalized split cost exceeds the merged cost.
MLClusterResult ml_penalty_cluster(const EmbeddedDataset& data, std::span<const MLSet> ml_sets, double w_m,
                                   std::size_t k, std::uint64_t seed, DistanceKind kind = DistanceKind::squared);

/// Splits soft ML sets against fixed centers and runs the merge passes.
/// Each set yields one or more groups; merges are counted into merges.
std::vector<MLGroup> partition_soft_sets(const EmbeddedDataset& data, std::span<const std::vector<Index>> soft_sets,
                                         const CenterSet& centers, double w_m, DistanceKind kind,
                                         std::size_t* merges = nullptr);

struct LocalSearchStats {
    std::size_t gy_checks = 0;
    std::size_t gy_violations = 0;  // g_y < 0 beyond rounding; must stay 0
    std::size_t removals = 0;       // points released from a CL matching
    std::size_t commits = 0;
};

/// Penalized local search over CL sets. cl_sets lists element indices;
/// element costs are weight * distance. Returns the center of every element
/// touched by a CL set (nullopt elsewhere). Elements already placed by an
/// earlier set keep their center, which becomes unavailable to the rest of
/// the later set.
std::vector<std::optional<std::size_t>> cl_local_search(const WeightedPoints& elements,
                                                        std::span<const std::vector<std::size_t>> cl_sets,
                                                        const CenterSet& centers, double w_cl,
                                                        DistanceKind kind = DistanceKind::squared,
                                                        LocalSearchStats* stats = nullptr);

struct ClusteringResult {
    std::vector<int> assignment;
    /// Centers the final assignment was computed against.
    CenterSet centers;
    /// k-means cost of the final partition about its mass centers.
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history;
    LocalSearchStats local_search;
    std::size_t ml_merges = 0;
    bool degenerate_seeding = false;
};

struct ClusterOptions {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    Penalties penalties;
    DistanceKind distance = DistanceKind::squared;
    Convergence convergence;
};

/// ML/CL constrained clustering with hard ML seeding.
ClusteringResult lsck_hc(const EmbeddedDataset& data, const ConstraintCollection& constraints,
                         const ClusterOptions& options);
/// Same as lsck_hc with every ML set treated as soft.
ClusteringResult lsck(const EmbeddedDataset& data, const ConstraintCollection& constraints,
                      const ClusterOptions& options);
/// k-means++ seeding followed by Lloyd iterations.
ClusteringResult kmeans_baseline(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed,
                                 const Convergence& convergence = {});

/// Resolves a negative tol to the data-scaled default.
double resolve_tolerance(const EmbeddedDataset& data, const Convergence& convergence);
/// Both penalties set to the mean point-to-center distance (in `kind`
/// units) of one baseline run.
Penalties auto_penalties(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed, DistanceKind kind,
                         const Convergence& convergence = {});

/// Sum of squared distances of points to the mass centers of their clusters.
double kmeans_objective(const EmbeddedDataset& data, std::span<const int> assignment, std::size_t k);

}  // namespace ckm
