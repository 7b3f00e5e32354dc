#include "lsck/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lsck/error.hpp"
#include "lsck/matching.hpp"
#include "lsck/rng.hpp"

namespace ckm {

double distance(DistanceKind kind, std::span<const double> a, std::span<const double> b) {
    const double sq = sq_dist(a, b);
    return kind == DistanceKind::squared ? sq : std::sqrt(sq);
}

void WeightedPoints::add(std::span<const double> coords, double weight) {
    if (coords.size() != dim_) throw Error("weighted points: dimension mismatch");
    if (!(weight > 0)) throw Error("weighted points: weight must be positive");
    coords_.insert(coords_.end(), coords.begin(), coords.end());
    weights_.push_back(weight);
}

SeedResult kmeanspp_seed(const WeightedPoints& points, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw Error("kmeanspp_seed: k must be >= 1");
    double total_weight = 0;
    for (std::size_t i = 0; i < points.size(); ++i) total_weight += points.weight(i);
    if (points.size() == 0 || total_weight < static_cast<double>(k))
        throw Error("kmeanspp_seed: total weight below k");

    Rng rng(seed);
    const std::size_t n = points.size();
    auto sample = [&](const std::vector<double>& mass, double total) {
        const double target = rng.uniform01() * total;
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += mass[i];
            if (target < acc) return i;
        }
        // Rounding: fall back to the last index with mass.
        for (std::size_t i = n; i-- > 0;)
            if (mass[i] > 0) return i;
        return n - 1;
    };

    SeedResult out{CenterSet(k, points.dim()), false};
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = points.weight(i);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<double> mass(n);

    std::size_t chosen = sample(weights, total_weight);
    for (std::size_t c = 0;; ++c) {
        std::copy(points[chosen].begin(), points[chosen].end(), out.centers[c].begin());
        if (c + 1 == k) break;
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(points[i], out.centers[c]));
            mass[i] = weights[i] * nearest[i];
            total += mass[i];
        }
        if (total > 0) {
            chosen = sample(mass, total);
        } else {
            out.degenerate = true;
            chosen = sample(weights, total_weight);
        }
    }
    return out;
}

namespace {

struct Partition {
    std::vector<Index> members;
    std::vector<double> centroid;
    std::size_t center = 0;
};

std::vector<double> centroid_of(const EmbeddedDataset& data, std::span<const Index> members) {
    std::vector<double> c(data.dim(), 0.0);
    for (Index i : members) {
        const auto p = data.point(i);
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += p[d];
    }
    for (auto& v : c) v /= static_cast<double>(members.size());
    return c;
}

// ML sets normalized for clustering: overlapping hard sets merged, soft sets
// stripped of points already bound by a hard set or an earlier soft set.
struct PreparedML {
    std::vector<std::vector<Index>> hard;
    std::vector<std::size_t> hard_source;
    std::vector<std::vector<Index>> soft;
    std::vector<std::size_t> soft_source;
};

PreparedML prepare_ml(std::size_t n, std::span<const MLSet> sets, bool all_soft) {
    PreparedML out;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<char> in_hard(n, 0);
    std::vector<std::size_t> first_source(n, SIZE_MAX);
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (Index i : sets[s].members)
            if (i >= n) throw Error("clustering: ML member index out of range");
        if (all_soft || !sets[s].hard) continue;
        const auto& m = sets[s].members;
        for (Index i : m) {
            in_hard[i] = 1;
            first_source[i] = std::min(first_source[i], s);
        }
        for (std::size_t t = 1; t < m.size(); ++t) {
            const auto a = find(m[0]), b = find(m[t]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::vector<std::size_t> slot(n, SIZE_MAX);
    for (Index i = 0; i < n; ++i) {
        if (!in_hard[i]) continue;
        const auto root = find(i);
        if (slot[root] == SIZE_MAX) {
            slot[root] = out.hard.size();
            out.hard.emplace_back();
            out.hard_source.push_back(first_source[i]);
        }
        out.hard[slot[root]].push_back(i);
        out.hard_source[slot[root]] = std::min(out.hard_source[slot[root]], first_source[i]);
    }

    std::vector<char> taken = in_hard;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (!all_soft && sets[s].hard) continue;
        std::vector<Index> kept;
        for (Index i : sets[s].members)
            if (!taken[i]) kept.push_back(i);
        if (kept.size() < 2) continue;
        for (Index i : kept) taken[i] = 1;
        std::sort(kept.begin(), kept.end());
        out.soft.push_back(std::move(kept));
        out.soft_source.push_back(s);
    }
    return out;
}

}  // namespace

std::vector<MLGroup> partition_soft_sets(const EmbeddedDataset& data, std::span<const std::vector<Index>> soft_sets,
                                         const CenterSet& centers, double w_m, DistanceKind kind,
                                         std::size_t* merges) {
    std::vector<MLGroup> out;
    for (std::size_t s = 0; s < soft_sets.size(); ++s) {
        // Split by nearest center; partitions indexed in center order.
        std::vector<Partition> parts;
        {
            std::vector<std::vector<Index>> by_center(centers.size());
            for (Index i : soft_sets[s]) by_center[centers.nearest(data.point(i))].push_back(i);
            for (auto& members : by_center) {
                if (members.empty()) continue;
                Partition p;
                p.members = std::move(members);
                p.centroid = centroid_of(data, p.members);
                p.center = centers.nearest(p.centroid);
                parts.push_back(std::move(p));
            }
        }
        std::vector<char> alive(parts.size(), 1);

        bool merged = true;
        while (merged) {
            merged = false;
            std::vector<std::size_t> order(parts.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return parts[a].members.size() > parts[b].members.size();
            });
            for (std::size_t i : order) {
                if (!alive[i]) continue;
                for (std::size_t j : order) {
                    if (j == i || !alive[j]) continue;
                    auto& pi = parts[i];
                    const auto& pj = parts[j];
                    const double size_i = static_cast<double>(pi.members.size());
                    const double size_j = static_cast<double>(pj.members.size());
                    std::vector<Index> both = pi.members;
                    both.insert(both.end(), pj.members.begin(), pj.members.end());
                    std::sort(both.begin(), both.end());
                    auto merged_centroid = centroid_of(data, both);
                    const auto target = centers.nearest(merged_centroid);
                    const double split_cost = (w_m + distance(kind, pj.centroid, centers[pj.center])) * size_j +
                                              (w_m + distance(kind, pi.centroid, centers[pi.center])) * size_i;
                    double merged_cost = 0;
                    for (Index p : both) merged_cost += distance(kind, data.point(p), centers[target]);
                    if (split_cost > merged_cost) {
                        pi.members = std::move(both);
                        pi.centroid = std::move(merged_centroid);
                        pi.center = target;
                        alive[j] = 0;
                        merged = true;
                        if (merges) ++*merges;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < parts.size(); ++i)
            if (alive[i]) out.push_back({std::move(parts[i].members), false, s});
    }
    return out;
}

namespace {

MLClusterResult ml_penalty_cluster_prepared(const EmbeddedDataset& data, const PreparedML& ml, double w_m,
                                            std::size_t k, std::uint64_t seed, DistanceKind kind) {
    const std::size_t n = data.size();
    if (k < 1 || k > n) throw Error("clustering: need 1 <= k <= n");

    WeightedPoints seeds(data.dim());
    std::vector<char> in_hard(n, 0);
    for (const auto& h : ml.hard) {
        seeds.add(centroid_of(data, h), static_cast<double>(h.size()));
        for (Index i : h) in_hard[i] = 1;
    }
    for (Index i = 0; i < n; ++i)
        if (!in_hard[i]) seeds.add(data.point(i), 1.0);

    MLClusterResult out;
    auto seeded = kmeanspp_seed(seeds, k, seed);
    out.centers = std::move(seeded.centers);
    out.degenerate_seeding = seeded.degenerate;
    for (std::size_t h = 0; h < ml.hard.size(); ++h) out.groups.push_back({ml.hard[h], true, ml.hard_source[h]});
    auto soft = partition_soft_sets(data, ml.soft, out.centers, w_m, kind, &out.merges);
    for (auto& g : soft) {
        g.source = ml.soft_source[g.source];
        out.groups.push_back(std::move(g));
    }
    return out;
}

}  // namespace

MLClusterResult ml_penalty_cluster(const EmbeddedDataset& data, std::span<const MLSet> ml_sets, double w_m,
                                   std::size_t k, std::uint64_t seed, DistanceKind kind) {
    return ml_penalty_cluster_prepared(data, prepare_ml(data.size(), ml_sets, false), w_m, k, seed, kind);
}

std::vector<std::optional<std::size_t>> cl_local_search(const WeightedPoints& elements,
                                                        std::span<const std::vector<std::size_t>> cl_sets,
                                                        const CenterSet& centers, double w_cl, DistanceKind kind,
                                                        LocalSearchStats* stats) {
    LocalSearchStats local;
    LocalSearchStats& st = stats ? *stats : local;
    const std::size_t k = centers.size();
    std::vector<std::optional<std::size_t>> placed(elements.size());

    auto cost = [&](std::size_t e, std::size_t c) { return elements.weight(e) * distance(kind, elements[e], centers[c]); };
    auto nearest = [&](std::size_t e) { return centers.nearest(elements[e]); };

    for (const auto& raw : cl_sets) {
        // Distinct elements in set order; already placed ones pin their centers.
        std::vector<std::size_t> free;
        std::vector<char> blocked(k, 0);
        for (std::size_t e : raw) {
            if (e >= elements.size()) throw Error("cl_local_search: element index out of range");
            if (std::find(free.begin(), free.end(), e) != free.end()) continue;
            if (placed[e])
                blocked[*placed[e]] = 1;
            else
                free.push_back(e);
        }
        if (free.size() > k) throw Error("cl_local_search: CL set larger than k");

        while (!free.empty()) {
            std::vector<std::size_t> cols;
            for (std::size_t c = 0; c < k; ++c)
                if (!blocked[c]) cols.push_back(c);
            if (cols.size() < free.size()) {
                // Pinned centers leave too few columns; match over all of them.
                cols.resize(k);
                std::iota(cols.begin(), cols.end(), 0);
            }
            auto match = [&](std::size_t skip) {
                const std::size_t rows = free.size() - (skip < free.size() ? 1 : 0);
                CostMatrix m(rows, cols.size());
                for (std::size_t r = 0, row = 0; r < free.size(); ++r) {
                    if (r == skip) continue;
                    for (std::size_t c = 0; c < cols.size(); ++c) m(row, c) = cost(free[r], cols[c]);
                    ++row;
                }
                return min_cost_matching(m);
            };

            const auto full = match(SIZE_MAX);
            double best_gain = -std::numeric_limits<double>::infinity();
            std::size_t best = 0, best_num = 1;
            for (std::size_t y = 0; y < free.size(); ++y) {
                const auto without = match(y);
                std::size_t num = 1;
                for (std::size_t r = 0, row = 0; r < free.size(); ++r) {
                    if (r == y) continue;
                    if (full.assignment[r] != without.assignment[row]) ++num;
                    ++row;
                }
                const double gain = full.total_cost - without.total_cost - cost(free[y], nearest(free[y]));
                ++st.gy_checks;
                if (gain < -1e-9 * (1.0 + full.total_cost)) ++st.gy_violations;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = y;
                    best_num = num;
                }
            }

            if (best_gain < static_cast<double>(best_num) * w_cl) {
                for (std::size_t r = 0; r < free.size(); ++r) placed[free[r]] = cols[full.assignment[r]];
                ++st.commits;
                break;
            }
            placed[free[best]] = nearest(free[best]);
            ++st.removals;
            free.erase(free.begin() + static_cast<std::ptrdiff_t>(best));
        }
    }
    return placed;
}

double resolve_tolerance(const EmbeddedDataset& data, const Convergence& convergence) {
    if (convergence.tol >= 0) return convergence.tol;
    double diag = 0;
    for (std::size_t d = 0; d < data.dim(); ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Index i = 0; i < data.size(); ++i) {
            lo = std::min(lo, data.point(i)[d]);
            hi = std::max(hi, data.point(i)[d]);
        }
        diag += (hi - lo) * (hi - lo);
    }
    return 1e-4 * diag;
}

double kmeans_objective(const EmbeddedDataset& data, std::span<const int> assignment, std::size_t k) {
    std::vector<double> sums(k * data.dim(), 0.0);
    std::vector<double> counts(k, 0.0);
    for (Index i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        const auto p = data.point(i);
        for (std::size_t d = 0; d < data.dim(); ++d) sums[c * data.dim() + d] += p[d];
        counts[c] += 1;
    }
    double total = 0;
    for (Index i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        const auto p = data.point(i);
        for (std::size_t d = 0; d < data.dim(); ++d) {
            const double t = p[d] - sums[c * data.dim() + d] / counts[c];
            total += t * t;
        }
    }
    return total;
}

namespace {

// Mass centers of the clusters; empty clusters keep their previous center.
CenterSet recompute_centers(const EmbeddedDataset& data, std::span<const int> assignment, const CenterSet& previous) {
    const std::size_t k = previous.size(), dim = data.dim();
    CenterSet next(k, dim);
    std::vector<double> counts(k, 0.0);
    for (Index i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        const auto p = data.point(i);
        auto row = next[c];
        for (std::size_t d = 0; d < dim; ++d) row[d] += p[d];
        counts[c] += 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
        auto row = next[c];
        if (counts[c] == 0) {
            std::copy(previous[c].begin(), previous[c].end(), row.begin());
        } else {
            for (auto& v : row) v /= counts[c];
        }
    }
    return next;
}

double max_shift(const CenterSet& a, const CenterSet& b) {
    double m = 0;
    for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, sq_dist(a[c], b[c]));
    return m;
}

ClusteringResult run_constrained(const EmbeddedDataset& data, const ConstraintCollection& constraints,
                                 const ClusterOptions& options, bool all_soft) {
    const std::size_t n = data.size(), k = options.k;
    if (k < 1 || k > n) throw Error("clustering: need 1 <= k <= n");
    const auto& pen = options.penalties;
    if (!(pen.w_m >= 0 && pen.w_cl >= 0)) throw Error("clustering: penalties must be >= 0");
    for (const auto& y : constraints.cl_sets)
        for (Index i : y.members)
            if (i >= n) throw Error("clustering: CL member index out of range");

    const auto ml = prepare_ml(n, constraints.ml_sets, all_soft);
    const double tol = resolve_tolerance(data, options.convergence);

    ClusteringResult result;
    auto first = ml_penalty_cluster_prepared(data, ml, pen.w_m, k, options.seed, options.distance);
    result.degenerate_seeding = first.degenerate_seeding;
    result.ml_merges = first.merges;
    CenterSet centers = std::move(first.centers);
    std::vector<MLGroup> groups = std::move(first.groups);

    std::vector<int> assignment(n, 0);
    for (int iter = 1;; ++iter) {
        if (iter > 1) {
            groups.clear();
            for (std::size_t h = 0; h < ml.hard.size(); ++h) groups.push_back({ml.hard[h], true, h});
            auto soft = partition_soft_sets(data, ml.soft, centers, pen.w_m, options.distance, &result.ml_merges);
            for (auto& g : soft) groups.push_back(std::move(g));
        }

        // Working set: one weighted element per group, then the plain points.
        WeightedPoints elements(data.dim());
        std::vector<std::size_t> element_of(n, SIZE_MAX);
        std::vector<std::vector<Index>> members_of;
        for (const auto& g : groups) {
            elements.add(centroid_of(data, g.members), static_cast<double>(g.members.size()));
            for (Index i : g.members) element_of[i] = members_of.size();
            members_of.push_back(g.members);
        }
        for (Index i = 0; i < n; ++i) {
            if (element_of[i] != SIZE_MAX) continue;
            elements.add(data.point(i), 1.0);
            element_of[i] = members_of.size();
            members_of.push_back({i});
        }

        std::vector<std::vector<std::size_t>> cl_elements;
        for (const auto& y : constraints.cl_sets) {
            std::vector<std::size_t> e;
            for (Index i : y.members) e.push_back(element_of[i]);
            cl_elements.push_back(std::move(e));
        }
        auto placed = cl_local_search(elements, cl_elements, centers, pen.w_cl, options.distance,
                                      &result.local_search);

        for (std::size_t e = 0; e < elements.size(); ++e) {
            const auto c = placed[e] ? *placed[e] : centers.nearest(elements[e]);
            for (Index i : members_of[e]) assignment[i] = static_cast<int>(c);
        }

        auto next = recompute_centers(data, assignment, centers);
        result.objective_history.push_back(kmeans_objective(data, assignment, k));
        result.iterations = iter;
        if (max_shift(centers, next) < tol) {
            result.converged = true;
            break;
        }
        if (iter >= options.convergence.max_iters) break;
        centers = std::move(next);
    }
    result.assignment = std::move(assignment);
    result.centers = std::move(centers);
    result.objective = result.objective_history.back();
    return result;
}

}  // namespace

ClusteringResult lsck_hc(const EmbeddedDataset& data, const ConstraintCollection& constraints,
                         const ClusterOptions& options) {
    return run_constrained(data, constraints, options, false);
}

ClusteringResult lsck(const EmbeddedDataset& data, const ConstraintCollection& constraints,
                      const ClusterOptions& options) {
    return run_constrained(data, constraints, options, true);
}

ClusteringResult kmeans_baseline(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed,
                                 const Convergence& convergence) {
    const std::size_t n = data.size();
    if (k < 1 || k > n) throw Error("kmeans_baseline: need 1 <= k <= n");
    WeightedPoints all(data.dim());
    for (Index i = 0; i < n; ++i) all.add(data.point(i), 1.0);
    auto seeded = kmeanspp_seed(all, k, seed);
    const double tol = resolve_tolerance(data, convergence);

    ClusteringResult result;
    result.degenerate_seeding = seeded.degenerate;
    CenterSet centers = std::move(seeded.centers);
    std::vector<int> assignment(n, 0);
    for (int iter = 1;; ++iter) {
        for (Index i = 0; i < n; ++i) assignment[i] = static_cast<int>(centers.nearest(data.point(i)));
        auto next = recompute_centers(data, assignment, centers);
        result.objective_history.push_back(kmeans_objective(data, assignment, k));
        result.iterations = iter;
        if (max_shift(centers, next) < tol) {
            result.converged = true;
            break;
        }
        if (iter >= convergence.max_iters) break;
        centers = std::move(next);
    }
    result.assignment = std::move(assignment);
    result.centers = std::move(centers);
    result.objective = result.objective_history.back();
    return result;
}

Penalties auto_penalties(const EmbeddedDataset& data, std::size_t k, std::uint64_t seed, DistanceKind kind,
                         const Convergence& convergence) {
    const auto base = kmeans_baseline(data, k, seed, convergence);
    double total = 0;
    for (Index i = 0; i < data.size(); ++i)
        total += distance(kind, data.point(i), base.centers[static_cast<std::size_t>(base.assignment[i])]);
    const double mean = total / static_cast<double>(data.size());
    return {mean, mean};
}

}  // namespace ckm
