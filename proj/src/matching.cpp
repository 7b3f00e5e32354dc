#include "lsck/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsck/error.hpp"

namespace ckm {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw Error("cost matrix: value count does not match shape");
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Tight-edge graph of an optimal dual solution; every perfect matching in it
// is an optimal assignment.
struct TightGraph {
    std::size_t n = 0;
    std::vector<char> tight;  // n x n
    bool operator()(std::size_t r, std::size_t c) const { return tight[r * n + c] != 0; }
};

// Augmenting path from row r over rows >= first_free_row, columns not yet visited.
bool augment(const TightGraph& g, std::size_t r, std::size_t first_free_row,
             std::vector<std::size_t>& mate_row, std::vector<std::size_t>& mate_col,
             std::vector<char>& visited) {
    for (std::size_t c = 0; c < g.n; ++c) {
        if (!g(r, c) || visited[c]) continue;
        visited[c] = 1;
        const std::size_t holder = mate_col[c];
        if (holder == kNone ||
            (holder >= first_free_row && augment(g, holder, first_free_row, mate_row, mate_col, visited))) {
            mate_row[r] = c;
            mate_col[c] = r;
            return true;
        }
    }
    return false;
}

}  // namespace

Matching min_cost_matching(const CostMatrix& m) {
    const std::size_t rows = m.rows(), n = m.cols();
    if (rows > n) throw Error("min_cost_matching: more rows than columns");
    double scale = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double v = m(r, c);
            if (!std::isfinite(v)) throw Error("min_cost_matching: non-finite cost");
            if (v < 0) throw Error("min_cost_matching: negative cost");
            scale = std::max(scale, v);
        }
    Matching out;
    if (rows == 0) return out;

    // Hungarian algorithm (potentials form) on the square matrix padded with
    // zero-cost dummy rows. 1-based internally.
    auto cost = [&](std::size_t i, std::size_t j) { return i <= rows ? m(i - 1, j - 1) : 0.0; };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    const double tol = 1e-10 * (1.0 + scale) * static_cast<double>(n);
    TightGraph g{n, std::vector<char>(n * n, 0)};
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            g.tight[r * n + c] = cost(r + 1, c + 1) - u[r + 1] - v[c + 1] <= tol;

    std::vector<std::size_t> mate_row(n, kNone), mate_col(n, kNone);
    for (std::size_t j = 1; j <= n; ++j) {
        mate_row[p[j] - 1] = j - 1;
        mate_col[j - 1] = p[j] - 1;
    }
    // The Hungarian matching uses only tight edges; make sure tolerance did
    // not drop any of them.
    for (std::size_t r = 0; r < n; ++r) g.tight[r * n + mate_row[r]] = 1;

    // Fix real rows in order to the smallest column that still admits a
    // perfect matching of the remaining rows.
    std::vector<char> visited(n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (!g(r, c)) continue;
            if (mate_row[r] == c) break;
            const std::size_t holder = mate_col[c];
            if (holder != kNone && holder < r) continue;  // taken by a fixed row
            const auto saved_row = mate_row, saved_col = mate_col;
            const std::size_t old = mate_row[r];
            mate_col[old] = kNone;
            mate_row[r] = c;
            mate_col[c] = r;
            bool ok = true;
            if (holder != kNone) {
                mate_row[holder] = kNone;
                std::fill(visited.begin(), visited.end(), 0);
                ok = augment(g, holder, r + 1, mate_row, mate_col, visited);
            }
            if (ok) break;
            mate_row = saved_row;
            mate_col = saved_col;
        }
    }

    out.assignment.assign(mate_row.begin(), mate_row.begin() + static_cast<std::ptrdiff_t>(rows));
    for (std::size_t r = 0; r < rows; ++r) out.total_cost += m(r, out.assignment[r]);
    return out;
}

}  // namespace ckm
