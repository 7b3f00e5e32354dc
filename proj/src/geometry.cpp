#include "lsck/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "lsck/error.hpp"
#include "lsck/rng.hpp"

namespace ckm {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("sq_dist: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dist(std::span<const double> a, std::span<const double> b) { return std::sqrt(sq_dist(a, b)); }

std::size_t CenterSet::nearest(std::span<const double> x) const {
    double unused = 0;
    return nearest(x, unused);
}

std::size_t CenterSet::nearest(std::span<const double> x, double& best_sq) const {
    std::size_t best = 0;
    best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k_; ++c) {
        const double d = sq_dist(x, (*this)[c]);
        if (d < best_sq) {
            best_sq = d;
            best = c;
        }
    }
    return best;
}

KCenterResult gonzalez_kcenter_from(const EmbeddedDataset& data, std::size_t k, Index first_center) {
    const std::size_t n = data.size();
    if (k < 1 || k > n) throw Error("gonzalez_kcenter: need 1 <= k <= n");
    if (first_center >= n) throw Error("gonzalez_kcenter: first center out of range");

    KCenterResult out;
    out.nearest_dist.assign(n, std::numeric_limits<double>::infinity());
    Index next = first_center;
    for (std::size_t c = 0; c < k; ++c) {
        out.centers.push_back(next);
        const auto center = data.point(next);
        double far = -1.0;
        for (Index i = 0; i < n; ++i) {
            const double d = dist(data.point(i), center);
            if (d < out.nearest_dist[i]) out.nearest_dist[i] = d;
            if (out.nearest_dist[i] > far) {
                far = out.nearest_dist[i];
                next = i;
            }
        }
        out.cost_kc = far;
    }
    return out;
}

KCenterResult gonzalez_kcenter(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed) {
    if (k < 1 || k > data.size()) throw Error("gonzalez_kcenter: need 1 <= k <= n");
    Rng rng(seed);
    return gonzalez_kcenter_from(data, k, rng.uniform_index(data.size()));
}

std::vector<double> grid_levels(double cost_kc, std::size_t n, std::size_t dim, double eps) {
    if (!(cost_kc > 0)) throw Error("grid_levels: cost_kc must be > 0 (degenerate data)");
    if (!(eps > 0 && eps < 1)) throw Error("grid_levels: eps must lie in (0, 1)");
    if (n == 0 || dim == 0) throw Error("grid_levels: n and dim must be >= 1");
    const double r0 = std::sqrt(cost_kc / (10.0 * static_cast<double>(n) * static_cast<double>(dim)));
    std::vector<double> levels;
    for (int j = 0;; ++j) {
        const double r = std::pow(1.0 + eps, j) * r0;
        levels.push_back(r);
        if (r >= 2.0 * cost_kc) break;
    }
    return levels;
}

GridPartition grid_partition(const EmbeddedDataset& data, const KCenterResult& kcenter,
                             std::span<const double> levels, std::uint64_t seed) {
    if (levels.empty()) throw Error("grid_partition: no levels");
    if (kcenter.nearest_dist.size() != data.size())
        throw Error("grid_partition: k-center result does not match dataset");

    GridPartition grid;
    grid.levels.assign(levels.begin(), levels.end());
    const std::size_t dim = data.dim();
    Rng rng(seed);
    grid.shifts.resize(levels.size() * dim);
    for (std::size_t j = 0; j < levels.size(); ++j)
        for (std::size_t d = 0; d < dim; ++d) grid.shifts[j * dim + d] = rng.uniform01() * levels[j];
    grid.level_of.resize(data.size());
    for (Index i = 0; i < data.size(); ++i) {
        const double d = kcenter.nearest_dist[i];
        auto it = std::lower_bound(levels.begin(), levels.end(), d);
        const std::size_t level =
            it == levels.end() ? levels.size() - 1 : static_cast<std::size_t>(it - levels.begin());
        grid.level_of[i] = level;

        const double side = levels[level];
        GridCellKey key{level, {}};
        key.coords.reserve(data.dim());
        const auto p = data.point(i);
        for (std::size_t d = 0; d < dim; ++d) {
            const double x = p[d];
            if (side > 0)
                key.coords.push_back(static_cast<std::int64_t>(std::floor((x + grid.shifts[level * dim + d]) / side)));
            else
                key.coords.push_back(std::bit_cast<std::int64_t>(x == 0.0 ? 0.0 : x));
        }
        grid.cells[std::move(key)].push_back(i);
    }
    return grid;
}

GridPartition build_grid(const EmbeddedDataset& data, const KCenterResult& kcenter, std::uint64_t seed,
                         double eps) {
    if (kcenter.cost_kc > 0)
        return grid_partition(data, kcenter, grid_levels(kcenter.cost_kc, data.size(), data.dim(), eps), seed);
    const double zero = 0.0;
    return grid_partition(data, kcenter, std::span<const double>(&zero, 1), seed);
}

}  // namespace ckm
