#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "lsck/constraints.hpp"
#include "lsck/error.hpp"
#include "lsck/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ckm;
using namespace testing;

namespace {

Labels permute(const Labels& l, int shift) {
    Labels out(l);
    for (auto& x : out) x = (x * 7 + shift) % 97 + 3;  // injective on small ids
    return out;
}

}  // namespace

TEST_CASE("metrics on identical labelings") {
    const Labels a{0, 1, 2, 0, 1, 2, 2};
    CHECK(acc_hungarian(a, a) == 1.0);
    CHECK(rand_index(a, a) == 1.0);
    CHECK(ari(a, a) == 1.0);
    CHECK(nmi(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metric hand examples") {
    CHECK(acc_hungarian(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0}) == 1.0);
    CHECK(rand_index(Labels{0, 1, 0, 1}, Labels{0, 0, 1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(ari(Labels{0, 0, 0, 0, 0, 0}, Labels{0, 0, 0, 1, 1, 1}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(nmi(Labels{0, 0, 0}, Labels{5, 5, 5}) == 1.0);
    CHECK(acc_hungarian(Labels{0, 0, 0, 0}, Labels{0, 1, 0, 1}) == 0.5);
}

TEST_CASE("metrics match brute-force and formula oracles on random small instances") {
    std::mt19937_64 g(2);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + t % 7;
        const auto pred = testing::random_labels(g, n, 1 + t % 4);
        const auto truth = testing::random_labels(g, n, 1 + (t / 4) % 4);
        CHECK(acc_hungarian(pred, truth) == doctest::Approx(brute_acc(pred, truth)).epsilon(1e-9));
        CHECK(rand_index(pred, truth) == doctest::Approx(pair_ri(pred, truth)).epsilon(1e-9));
        CHECK(std::abs(ari(pred, truth) - rational_ari(pred, truth)) <= 1e-12);
        CHECK(std::abs(nmi(pred, truth) - direct_nmi(pred, truth)) <= 1e-12);
    }
}

TEST_CASE("metrics are invariant under relabeling") {
    std::mt19937_64 g(9);
    for (int t = 0; t < 50; ++t) {
        const auto pred = testing::random_labels(g, 30, 5), truth = testing::random_labels(g, 30, 4);
        const auto p2 = permute(pred, t), t2 = permute(truth, t + 1);
        CHECK(acc_hungarian(p2, t2) == doctest::Approx(acc_hungarian(pred, truth)));
        CHECK(rand_index(p2, t2) == doctest::Approx(rand_index(pred, truth)));
        CHECK(ari(p2, t2) == doctest::Approx(ari(pred, truth)));
        CHECK(nmi(p2, t2) == doctest::Approx(nmi(pred, truth)));
    }
}

TEST_CASE("metric ranges and ACC lower bound on balanced truth") {
    std::mt19937_64 g(10);
    for (int t = 0; t < 50; ++t) {
        const int k = 2 + t % 5;
        Labels truth(60);
        for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(i) % k;
        const auto pred = testing::random_labels(g, 60, 1 + t % k);
        const double acc = acc_hungarian(pred, truth), ri = rand_index(pred, truth), mi = nmi(pred, truth);
        CHECK(acc >= 1.0 / k - 1e-12);
        CHECK(acc <= 1.0);
        CHECK((ri >= 0 && ri <= 1));
        CHECK((mi >= -1e-12 && mi <= 1 + 1e-12));
        CHECK(ari(pred, truth) <= 1.0 + 1e-12);
    }
}

TEST_CASE("NMI of independent labelings is near zero") {
    std::mt19937_64 g(12);
    const auto a = testing::random_labels(g, 10000, 10), b = testing::random_labels(g, 10000, 10);
    CHECK(nmi(a, b) < 0.05);
}

TEST_CASE("metric input validation") {
    CHECK_THROWS_AS(acc_hungarian(Labels{0, 1}, Labels{0}), Error);
    CHECK_THROWS_AS(acc_hungarian(Labels{}, Labels{}), Error);
    CHECK_THROWS_AS(rand_index(Labels{0, 1}, Labels{0}), Error);
    CHECK_THROWS_AS(ari(Labels{0, 1}, Labels{0}), Error);
    CHECK_THROWS_AS(nmi(Labels{0, 1}, Labels{0}), Error);
}

TEST_CASE("constraint_ri") {
    const Labels truth{0, 0, 1, 1, 2, 2};
    ConstraintCollection c;
    CHECK(constraint_ri(c, truth) == 1.0);

    MLSet bad;
    bad.members = {1, 2};
    c.ml_sets = {bad};
    CHECK(constraint_ri(c, truth) == 0.0);

    // pair-enumeration cross-check on a mixed collection
    std::mt19937_64 g(13);
    for (int t = 0; t < 50; ++t) {
        const auto labels = testing::random_labels(g, 20, 4);
        ConstraintCollection mixed;
        std::size_t agree = 0, total = 0;
        std::uniform_int_distribution<int> pick(0, 19);
        for (int s = 0; s < 3; ++s) {
            std::set<Index> m;
            while (m.size() < 3 + static_cast<std::size_t>(s)) m.insert(static_cast<Index>(pick(g)));
            MLSet x;
            x.members.assign(m.begin(), m.end());
            mixed.ml_sets.push_back(x);
            for (auto a = m.begin(); a != m.end(); ++a)
                for (auto b = std::next(a); b != m.end(); ++b) {
                    ++total;
                    agree += labels[*a] == labels[*b];
                }
            CLSet y;
            std::set<Index> ym;
            while (ym.size() < 2 + static_cast<std::size_t>(s)) ym.insert(static_cast<Index>(pick(g)));
            y.members.assign(ym.begin(), ym.end());
            mixed.cl_sets.push_back(y);
            for (auto a = ym.begin(); a != ym.end(); ++a)
                for (auto b = std::next(a); b != ym.end(); ++b) {
                    ++total;
                    agree += labels[*a] != labels[*b];
                }
        }
        const auto counts = constraint_pair_counts(mixed, labels);
        CHECK(counts.total == total);
        CHECK(counts.consistent == agree);
        CHECK(constraint_ri(mixed, labels) == doctest::Approx(double(agree) / double(total)));
    }
}
