#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "lsck/error.hpp"
#include "lsck/geometry.hpp"
#include "support.hpp"

using namespace ckm;

namespace {

// Exhaustive min-max k-center cost over all k-subsets.
double brute_kcenter(const EmbeddedDataset& d, std::size_t k) {
    const std::size_t n = d.size();
    std::vector<char> pick(n, 0);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), 1);
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0;
        for (Index i = 0; i < n; ++i) {
            double near = std::numeric_limits<double>::infinity();
            for (Index c = 0; c < n; ++c)
                if (pick[c]) near = std::min(near, dist(d.point(i), d.point(c)));
            worst = std::max(worst, near);
        }
        best = std::min(best, worst);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

EmbeddedDataset random_points(std::mt19937_64& g, std::size_t n, std::size_t dim, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (auto& r : rows)
        for (auto& x : r) x = nd(g);
    return testing::make_dataset(rows);
}

}  // namespace

TEST_CASE("sq_dist") {
    const std::vector<double> a{1.5, -2.0}, o{0, 0}, b{3, 4};
    CHECK(sq_dist(a, a) == 0.0);
    CHECK(sq_dist(o, b) == 25.0);
    CHECK(dist(o, b) == 5.0);
    const std::vector<double> c{1, 2, 3};
    CHECK_THROWS_AS(sq_dist(a, c), Error);

    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(7), y(7);
        for (auto& v : x) v = u(g);
        for (auto& v : y) v = u(g);
        double s = 0;
        for (std::size_t i = 0; i < 7; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        CHECK(sq_dist(x, y) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("CenterSet::nearest breaks ties toward the lowest index") {
    CenterSet c(3, 1);
    c[0][0] = 0;
    c[1][0] = 10;
    c[2][0] = 10;
    const std::vector<double> mid{5}, right{9};
    CHECK(c.nearest(mid) == 0);
    CHECK(c.nearest(right) == 1);
}

TEST_CASE("gonzalez_kcenter: k = n has zero cost") {
    std::mt19937_64 g(1);
    const auto d = random_points(g, 9, 3);
    const auto r = gonzalez_kcenter(d, 9, 5);
    CHECK(r.cost_kc == 0.0);
    CHECK(std::set<Index>(r.centers.begin(), r.centers.end()).size() == 9);
}

TEST_CASE("gonzalez_kcenter: 1-D {0, 1, 10}") {
    const auto d = testing::line({0, 1, 10});
    const auto r = gonzalez_kcenter_from(d, 2, 0);
    CHECK(r.centers == std::vector<Index>{0, 2});
    CHECK(r.cost_kc == 1.0);
    CHECK(brute_kcenter(d, 2) == 1.0);
    CHECK(r.nearest_dist == std::vector<double>{0, 1, 0});
}

TEST_CASE("gonzalez_kcenter is within 2x of the exhaustive optimum") {
    std::mt19937_64 g(2024);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 4 + t % 7;
        const auto d = random_points(g, n, 1 + t % 3);
        const std::size_t k = 1 + t % std::min<std::size_t>(n - 1, 4);
        const auto r = gonzalez_kcenter(d, k, static_cast<std::uint64_t>(t));
        CHECK(r.cost_kc <= 2.0 * brute_kcenter(d, k) + 1e-12);
        CHECK(r.centers.size() == k);
    }
}

TEST_CASE("gonzalez_kcenter is deterministic and validates k") {
    std::mt19937_64 g(3);
    const auto d = random_points(g, 50, 4);
    const auto a = gonzalez_kcenter(d, 5, 9), b = gonzalez_kcenter(d, 5, 9);
    CHECK(a.centers == b.centers);
    CHECK(a.cost_kc == b.cost_kc);
    CHECK_THROWS_AS(gonzalez_kcenter(d, 51, 0), Error);
    CHECK_THROWS_AS(gonzalez_kcenter(d, 0, 0), Error);
}

TEST_CASE("grid_levels") {
    const auto l = grid_levels(1.0, 10, 1, 0.1);
    CHECK(l[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(l[1] == doctest::Approx(0.11).epsilon(1e-15));
    for (std::size_t j = 1; j < l.size(); ++j) {
        CHECK(l[j] > l[j - 1]);
        CHECK(l[j] / l[j - 1] == doctest::Approx(1.1));
    }
    CHECK(l.back() >= 2.0);
    CHECK(l[l.size() - 2] < 2.0);
    // 0.1 * 1.1^j >= 2  first at j = ceil(log(20) / log(1.1)) = 32
    CHECK(l.size() == 33);
    CHECK_THROWS_AS(grid_levels(0.0, 10, 1), Error);
}

TEST_CASE("grid_partition: identical points share one cell") {
    const auto d = testing::make_dataset({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
    const auto kc = gonzalez_kcenter(d, 2, 0);
    CHECK(kc.cost_kc == 0.0);
    const auto grid = build_grid(d, kc, 7);
    REQUIRE(grid.cells.size() == 1);
    CHECK(grid.cells.begin()->second == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("grid_partition: points farther apart than the largest side split") {
    const auto d = testing::make_dataset({{0.0, 0.0}, {5.0, 0.0}});
    KCenterResult kc;
    kc.cost_kc = 1.0;
    kc.nearest_dist = {0.2, 0.2};
    const std::vector<double> levels{0.5, 1.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto grid = grid_partition(d, kc, levels, seed);
        CHECK(grid.cells.size() == 2);
    }
}

TEST_CASE("grid_partition: cells are disjoint, cover all points and respect the diameter bound") {
    std::mt19937_64 g(99);
    for (int t = 0; t < 20; ++t) {
        const std::size_t dim = 1 + t % 4;
        const auto d = random_points(g, 20, dim, 3.0);
        const auto kc = gonzalez_kcenter(d, 3, static_cast<std::uint64_t>(t));
        const auto grid = build_grid(d, kc, static_cast<std::uint64_t>(t));
        std::vector<int> seen(d.size(), 0);
        for (const auto& [key, members] : grid.cells) {
            const double side = grid.levels[key.level];
            for (Index i : members) {
                ++seen[i];
                CHECK(grid.level_of[i] == key.level);
                // r_{j-1} < dist <= r_j, with the last level catching the rest
                const double nd = kc.nearest_dist[i];
                if (key.level > 0) CHECK(nd > grid.levels[key.level - 1]);
                if (key.level + 1 < grid.levels.size()) CHECK(nd <= side);
            }
            for (Index a : members)
                for (Index b : members) CHECK(dist(d.point(a), d.point(b)) <= side * std::sqrt(double(dim)) + 1e-12);
        }
        for (int s : seen) CHECK(s == 1);
    }
}

TEST_CASE("grid_partition is deterministic for a seed") {
    std::mt19937_64 g(5);
    const auto d = random_points(g, 200, 3);
    const auto kc = gonzalez_kcenter(d, 4, 1);
    const auto a = build_grid(d, kc, 3), b = build_grid(d, kc, 3);
    CHECK(a.cells == b.cells);
    CHECK(a.shifts == b.shifts);
}
