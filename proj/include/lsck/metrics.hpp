#pragma once

#include <span>
#include <vector>

namespace ckm {

struct ConstraintCollection;

/// Accuracy under the best one-to-one cluster-to-class relabeling.
double acc_hungarian(std::span<const int> pred, std::span<const int> truth);
/// Fraction of point pairs on which the two labelings agree.
double rand_index(std::span<const int> pred, std::span<const int> truth);
/// Adjusted Rand Index (Hubert-Arabie).
double ari(std::span<const int> pred, std::span<const int> truth);
/// Mutual information over the arithmetic mean of the entropies; 1.0 when
/// both labelings are a single cluster.
double nmi(std::span<const int> pred, std::span<const int> truth);

struct ConstraintPairCounts {
    std::size_t consistent = 0;
    std::size_t total = 0;
};

/// Agreement of constraint-implied pairs with ground truth: same-set pairs
/// of ML sets should share a label, pairs inside CL sets should not.
ConstraintPairCounts constraint_pair_counts(const ConstraintCollection& collection, std::span<const int> truth);
/// Returns 1.0 when the collection implies no pairs.
double constraint_ri(const ConstraintCollection& collection, std::span<const int> truth);

}  // namespace ckm
