#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "lsck/matching.hpp"

namespace testing {

using Labels = std::vector<int>;

// Every injective row -> column map, visited in lexicographic order; keeps
// the first one reaching the minimum.
inline ckm::Matching brute_force(const ckm::CostMatrix& m) {
    ckm::Matching best;
    best.total_cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> cur;
    std::vector<char> used(m.cols(), 0);
    std::function<void(double)> rec = [&](double cost) {
        const std::size_t r = cur.size();
        if (r == m.rows()) {
            if (cost < best.total_cost - 1e-12) {
                best.total_cost = cost;
                best.assignment = cur;
            }
            return;
        }
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (used[c]) continue;
            used[c] = 1;
            cur.push_back(c);
            rec(cost + m(r, c));
            cur.pop_back();
            used[c] = 0;
        }
    };
    rec(0.0);
    return best;
}

// Best matched count over injective maps from predicted clusters to classes.
inline double brute_acc(const Labels& pred, const Labels& truth) {
    const std::set<int> ps(pred.begin(), pred.end()), ts(truth.begin(), truth.end());
    const std::vector<int> pc(ps.begin(), ps.end()), tc(ts.begin(), ts.end());
    std::size_t best = 0;
    std::vector<int> map(pc.size(), -1);
    std::vector<char> used(tc.size(), 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == pc.size()) {
            std::size_t hit = 0;
            for (std::size_t p = 0; p < pred.size(); ++p) {
                const auto ci = std::lower_bound(pc.begin(), pc.end(), pred[p]) - pc.begin();
                if (map[ci] >= 0 && tc[map[ci]] == truth[p]) ++hit;
            }
            best = std::max(best, hit);
            return;
        }
        rec(i + 1);  // cluster left unmatched
        for (std::size_t t = 0; t < tc.size(); ++t) {
            if (used[t]) continue;
            used[t] = 1;
            map[i] = static_cast<int>(t);
            rec(i + 1);
            map[i] = -1;
            used[t] = 0;
        }
    };
    rec(0);
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

inline double pair_ri(const Labels& a, const Labels& b) {
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            ++total;
            agree += (a[i] == a[j]) == (b[i] == b[j]);
        }
    return total ? static_cast<double>(agree) / static_cast<double>(total) : 1.0;
}

// ARI = (2aN - 2bc) / ((b+c)N - 2bc) in integers.
inline double rational_ari(const Labels& pred, const Labels& truth) {
    std::map<std::pair<int, int>, long long> nij;
    std::map<int, long long> ai, bj;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++nij[{pred[i], truth[i]}];
        ++ai[pred[i]];
        ++bj[truth[i]];
    }
    auto c2 = [](long long x) { return x * (x - 1) / 2; };
    long long a = 0, b = 0, c = 0;
    for (auto& [_, v] : nij) a += c2(v);
    for (auto& [_, v] : ai) b += c2(v);
    for (auto& [_, v] : bj) c += c2(v);
    const long long N = c2(static_cast<long long>(pred.size()));
    const long long num = 2 * a * N - 2 * b * c;
    const long long den = (b + c) * N - 2 * b * c;
    if (den == 0) return 1.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline double direct_nmi(const Labels& pred, const Labels& truth) {
    const double n = static_cast<double>(pred.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        joint[{pred[i], truth[i]}] += 1;
        pa[pred[i]] += 1;
        pb[truth[i]] += 1;
    }
    double mi = 0, ha = 0, hb = 0;
    for (auto& [k, v] : joint) mi += v / n * std::log((v / n) / ((pa[k.first] / n) * (pb[k.second] / n)));
    for (auto& [_, v] : pa) ha -= v / n * std::log(v / n);
    for (auto& [_, v] : pb) hb -= v / n * std::log(v / n);
    if (ha + hb == 0) return 1.0;
    return mi / ((ha + hb) / 2);
}

}  // namespace testing
