#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "legendre/engine.hpp"

namespace legendre {

/// Cluster assignments; only the partition structure matters, so every
/// metric here is invariant under relabeling of either argument.
using LabelVector = std::vector<int>;

/// Rows indexed by truth label id, columns by predicted label id.
std::vector<std::vector<int>> contingency_table(const LabelVector& truth,
                                                const LabelVector& pred);

/// (pairs together in both + pairs apart in both) / C(n,2).
double rand_index(const LabelVector& truth, const LabelVector& pred);

/// Chance-adjusted Rand index via the permutation-model contingency form.
/// Returns 1 when both labelings describe the same partition even if the
/// adjustment denominator vanishes.
double adjusted_rand_index(const LabelVector& truth, const LabelVector& pred);

/// (MI - E[MI]) / (max(H(U), H(V)) - E[MI]) with the exact hypergeometric
/// E[MI]; natural-log entropies. 1 for identical partitions, 0 when the
/// denominator vanishes otherwise.
double adjusted_mutual_info(const LabelVector& truth, const LabelVector& pred);

struct KMeansResult {
    LabelVector labels;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;  // per Lloyd iteration of the best run
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs.
/// Deterministic given seed; empty clusters are reseeded to the point
/// farthest from its centroid.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int restarts = 10);

enum class FeatureKind {
    SumThetaEta,
    SumThetaEtaBeta,
    SumThetaNonzero,
    SumPNonzero,
    LastDKL,
    UnfoldedP,
    UnfoldedThetaEta,
    BetaThetaEta,
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

struct FeatureVector {
    std::vector<double> values;
    FeatureKind kind = FeatureKind::UnfoldedP;
    std::string shape_tag;  // e.g. "[28x28,1]" or "[50x2,1]"
};

/// Build the clustering feature of the given kind from a finished run.
FeatureVector extract_features(const DecompositionState& state,
                               const DecompositionResult& result, FeatureKind kind);

}  // namespace legendre
