#pragma once

#include <cstddef>
#include <vector>

namespace ckm {

/// rows x cols nonnegative costs with rows <= cols.
class CostMatrix {
public:
    CostMatrix(std::size_t rows, std::size_t cols);
    CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

struct Matching {
    /// Column matched to each row; injective.
    std::vector<std::size_t> assignment;
    double total_cost = 0.0;
};

/// Exact minimum-cost one-sided perfect matching. Among optimal matchings
/// (up to a relative tolerance of ~1e-10) returns the lexicographically
/// smallest assignment vector. Throws if rows > cols or an entry is
/// negative or non-finite.
Matching min_cost_matching(const CostMatrix& m);

}  // namespace ckm
