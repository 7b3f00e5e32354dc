#include "lsck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lsck/constraints.hpp"
#include "lsck/error.hpp"
#include "lsck/matching.hpp"

namespace ckm {

namespace {

struct Contingency {
    std::size_t rows = 0;  // distinct pred labels
    std::size_t cols = 0;  // distinct truth labels
    std::vector<double> counts;
    std::vector<double> row_sums;
    std::vector<double> col_sums;
    double n = 0;
    double at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
};

std::vector<std::size_t> dense(std::span<const int> labels, std::size_t& distinct) {
    std::map<int, std::size_t> ids;
    for (int l : labels) ids.emplace(l, 0);
    std::size_t next = 0;
    for (auto& [label, id] : ids) id = next++;
    distinct = next;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(ids.at(l));
    return out;
}

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw Error("metrics: length mismatch");
    if (pred.empty()) throw Error("metrics: empty input");
    Contingency t;
    const auto p = dense(pred, t.rows);
    const auto q = dense(truth, t.cols);
    t.counts.assign(t.rows * t.cols, 0.0);
    t.row_sums.assign(t.rows, 0.0);
    t.col_sums.assign(t.cols, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        t.counts[p[i] * t.cols + q[i]] += 1;
        t.row_sums[p[i]] += 1;
        t.col_sums[q[i]] += 1;
    }
    t.n = static_cast<double>(pred.size());
    return t;
}

double choose2(double x) { return x * (x - 1) / 2; }

double entropy(const std::vector<double>& sums, double n) {
    double h = 0;
    for (double s : sums)
        if (s > 0) h -= (s / n) * std::log(s / n);
    return h;
}

}  // namespace

double acc_hungarian(std::span<const int> pred, std::span<const int> truth) {
    const auto t = contingency(pred, truth);
    const bool transpose = t.rows > t.cols;
    const std::size_t rows = transpose ? t.cols : t.rows, cols = transpose ? t.rows : t.cols;
    CostMatrix cost(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            cost(r, c) = t.n - (transpose ? t.at(c, r) : t.at(r, c));
    const auto m = min_cost_matching(cost);
    double matched = 0;
    for (std::size_t r = 0; r < rows; ++r) matched += t.n - cost(r, m.assignment[r]);
    return matched / t.n;
}

double rand_index(std::span<const int> pred, std::span<const int> truth) {
    const auto t = contingency(pred, truth);
    if (t.n < 2) return 1.0;
    double same_both = 0, same_pred = 0, same_truth = 0;
    for (double c : t.counts) same_both += choose2(c);
    for (double s : t.row_sums) same_pred += choose2(s);
    for (double s : t.col_sums) same_truth += choose2(s);
    const double pairs = choose2(t.n);
    // agreements = pairs together in both + pairs apart in both
    return (pairs + 2 * same_both - same_pred - same_truth) / pairs;
}

double ari(std::span<const int> pred, std::span<const int> truth) {
    const auto t = contingency(pred, truth);
    double index = 0, a = 0, b = 0;
    for (double c : t.counts) index += choose2(c);
    for (double s : t.row_sums) a += choose2(s);
    for (double s : t.col_sums) b += choose2(s);
    const double pairs = choose2(t.n);
    const double expected = pairs > 0 ? a * b / pairs : 0.0;
    const double max_index = (a + b) / 2;
    if (max_index == expected) return 1.0;  // both trivial partitions, identical structure
    return (index - expected) / (max_index - expected);
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
    const auto t = contingency(pred, truth);
    const double hp = entropy(t.row_sums, t.n), ht = entropy(t.col_sums, t.n);
    if (hp == 0 && ht == 0) return 1.0;
    double mi = 0;
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) {
            const double nij = t.at(r, c);
            if (nij > 0) mi += (nij / t.n) * std::log(t.n * nij / (t.row_sums[r] * t.col_sums[c]));
        }
    return std::clamp(mi / ((hp + ht) / 2), 0.0, 1.0);
}

ConstraintPairCounts constraint_pair_counts(const ConstraintCollection& collection, std::span<const int> truth) {
    ConstraintPairCounts out;
    auto label = [&](Index i) {
        if (i >= truth.size()) throw Error("constraint_ri: constraint index out of range");
        return truth[i];
    };
    for (const auto& s : collection.ml_sets)
        for (std::size_t a = 0; a < s.members.size(); ++a)
            for (std::size_t b = a + 1; b < s.members.size(); ++b) {
                ++out.total;
                out.consistent += label(s.members[a]) == label(s.members[b]);
            }
    for (const auto& s : collection.cl_sets)
        for (std::size_t a = 0; a < s.members.size(); ++a)
            for (std::size_t b = a + 1; b < s.members.size(); ++b) {
                ++out.total;
                out.consistent += label(s.members[a]) != label(s.members[b]);
            }
    return out;
}

double constraint_ri(const ConstraintCollection& collection, std::span<const int> truth) {
    const auto c = constraint_pair_counts(collection, truth);
    return c.total == 0 ? 1.0 : static_cast<double>(c.consistent) / static_cast<double>(c.total);
}

}  // namespace ckm
