#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "lsck/dataset.hpp"

namespace ckm {

double sq_dist(std::span<const double> a, std::span<const double> b);
double dist(std::span<const double> a, std::span<const double> b);

/// k row-vectors of dimension dim.
class CenterSet {
public:
    CenterSet() = default;
    CenterSet(std::size_t k, std::size_t dim) : k_(k), dim_(dim), data_(k * dim, 0.0) {}

    std::size_t size() const { return k_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }
    const std::vector<double>& data() const { return data_; }

    /// Index of the nearest center; ties go to the lowest index.
    std::size_t nearest(std::span<const double> x) const;
    std::size_t nearest(std::span<const double> x, double& best_sq) const;

private:
    std::size_t k_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

struct KCenterResult {
    std::vector<Index> centers;
    /// Max Euclidean distance of any point to its nearest chosen center.
    double cost_kc = 0.0;
    /// Euclidean distance of each point to its nearest chosen center.
    std::vector<double> nearest_dist;
};

/// Farthest-first traversal (2-approximation of min-max k-center). The first
/// center is drawn uniformly from the seed unless first_center is given.
KCenterResult gonzalez_kcenter(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed);
KCenterResult gonzalez_kcenter_from(const EmbeddedDataset& data, std::size_t k, Index first_center);

/// Radii r_j = (1+eps)^j * sqrt(cost_kc / (10 n dim)), j = 0.., up to and
/// including the first r_j >= 2 cost_kc. Throws on cost_kc <= 0.
std::vector<double> grid_levels(double cost_kc, std::size_t n, std::size_t dim, double eps = 0.1);

struct GridCellKey {
    std::size_t level = 0;
    std::vector<std::int64_t> coords;
    auto operator<=>(const GridCellKey&) const = default;
};

struct GridPartition {
    std::vector<double> levels;
    /// Lattice offset of each level, levels.size() x dim.
    std::vector<double> shifts;
    /// Cells in key order; each holds ascending point indices.
    std::map<GridCellKey, std::vector<Index>> cells;
    /// Level of each point.
    std::vector<std::size_t> level_of;
};

/// Buckets each point at the level matching its distance to the nearest
/// k-center point, then into cubes of side r_j at that level. Each level's
/// lattice is shifted by a random offset in [0, r_j) per axis drawn from
/// seed. A zero radius (degenerate data) groups exactly coincident points.
GridPartition grid_partition(const EmbeddedDataset& data, const KCenterResult& kcenter,
                             std::span<const double> levels, std::uint64_t seed);

/// Levels and partition in one call, with the cost_kc = 0 fallback to a
/// single zero-radius level.
GridPartition build_grid(const EmbeddedDataset& data, const KCenterResult& kcenter, std::uint64_t seed,
                         double eps = 0.1);

}  // namespace ckm
