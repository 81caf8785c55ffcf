#include "legendre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "legendre/rng.hpp"

namespace legendre {

namespace {

void check_pair(const LabelVector& truth, const LabelVector& pred) {
    if (truth.size() != pred.size())
        throw LengthMismatch("label vectors differ in length");
    if (truth.size() < 2) throw TooFewSamples("need at least 2 samples");
}

std::vector<int> compact_ids(const LabelVector& labels) {
    std::map<int, int> remap;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
        out[i] = it->second;
    }
    return out;
}

// True when the two labelings induce the same partition of the samples.
bool same_partition(const LabelVector& a, const LabelVector& b) {
    std::map<int, int> fwd, bwd;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [fit, fnew] = fwd.emplace(a[i], b[i]);
        if (!fnew && fit->second != b[i]) return false;
        auto [bit, bnew] = bwd.emplace(b[i], a[i]);
        if (!bnew && bit->second != a[i]) return false;
    }
    return true;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

std::vector<std::vector<int>> contingency_table(const LabelVector& truth,
                                                const LabelVector& pred) {
    check_pair(truth, pred);
    const auto t = compact_ids(truth);
    const auto p = compact_ids(pred);
    const int rows = *std::max_element(t.begin(), t.end()) + 1;
    const int cols = *std::max_element(p.begin(), p.end()) + 1;
    std::vector<std::vector<int>> table(static_cast<std::size_t>(rows),
                                        std::vector<int>(static_cast<std::size_t>(cols), 0));
    for (std::size_t i = 0; i < t.size(); ++i)
        ++table[static_cast<std::size_t>(t[i])][static_cast<std::size_t>(p[i])];
    return table;
}

double rand_index(const LabelVector& truth, const LabelVector& pred) {
    check_pair(truth, pred);
    const std::size_t n = truth.size();
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool together_t = truth[i] == truth[j];
            const bool together_p = pred[i] == pred[j];
            if (together_t == together_p) ++agree;
        }
    return static_cast<double>(agree) / choose2(static_cast<double>(n));
}

double adjusted_rand_index(const LabelVector& truth, const LabelVector& pred) {
    const auto table = contingency_table(truth, pred);
    const double n = static_cast<double>(truth.size());

    double sum_ij = 0.0;
    std::vector<double> row_sums(table.size(), 0.0);
    std::vector<double> col_sums(table[0].size(), 0.0);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            sum_ij += choose2(table[i][j]);
            row_sums[i] += table[i][j];
            col_sums[j] += table[i][j];
        }
    double sum_a = 0.0, sum_b = 0.0;
    for (double a : row_sums) sum_a += choose2(a);
    for (double b : col_sums) sum_b += choose2(b);

    const double expected = sum_a * sum_b / choose2(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0) return same_partition(truth, pred) ? 1.0 : 0.0;
    return (sum_ij - expected) / denom;
}

double adjusted_mutual_info(const LabelVector& truth, const LabelVector& pred) {
    check_pair(truth, pred);
    if (same_partition(truth, pred)) return 1.0;

    const auto table = contingency_table(truth, pred);
    const double n = static_cast<double>(truth.size());
    const std::size_t rows = table.size();
    const std::size_t cols = table[0].size();

    std::vector<double> a(rows, 0.0), b(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            a[i] += table[i][j];
            b[j] += table[i][j];
        }

    double mi = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double nij = table[i][j];
            if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (a[i] * b[j]));
        }

    double hu = 0.0, hv = 0.0;
    for (double ai : a)
        if (ai > 0.0) hu -= (ai / n) * std::log(ai / n);
    for (double bj : b)
        if (bj > 0.0) hv -= (bj / n) * std::log(bj / n);

    // Exact permutation-model expectation of MI (hypergeometric weights).
    double emi = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double ai = a[i], bj = b[j];
            const double lo = std::max(1.0, ai + bj - n);
            const double hi = std::min(ai, bj);
            for (double nij = lo; nij <= hi; nij += 1.0) {
                const double log_weight =
                    std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                    std::lgamma(n - bj + 1) - std::lgamma(n + 1) - std::lgamma(nij + 1) -
                    std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                    std::lgamma(n - ai - bj + nij + 1);
                emi += (nij / n) * std::log(n * nij / (ai * bj)) * std::exp(log_weight);
            }
        }
    }

    const double denom = std::max(hu, hv) - emi;
    if (std::abs(denom) < 1e-15) return 0.0;
    return (mi - emi) / denom;
}

namespace {

double sq_dist(const std::vector<double>& x, const std::vector<double>& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = x[i] - y[i];
        d += t * t;
    }
    return d;
}

KMeansResult lloyd_run(const std::vector<std::vector<double>>& points, int k,
                       std::uint64_t seed) {
    const std::size_t n = points.size();
    const std::size_t dim = points[0].size();
    const auto kk = static_cast<std::size_t>(k);
    Rng rng(seed);

    // k-means++ seeding.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(kk);
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    while (centroids.size() < kk) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            centroids.push_back(points[rng.below(n)]);
            continue;
        }
        double target = rng.uniform01() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= d2[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
        centroids.push_back(points[pick]);
    }

    KMeansResult res;
    res.labels.assign(n, -1);
    constexpr int kMaxLloyd = 100;
    for (int iter = 0; iter < kMaxLloyd; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best_c = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < kk; ++c) {
                const double d = sq_dist(points[i], centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            if (res.labels[i] != best_c) {
                res.labels[i] = best_c;
                changed = true;
            }
            inertia += best;
        }
        res.inertia = inertia;
        res.inertia_history.push_back(inertia);
        res.iterations = iter + 1;
        if (!changed) break;

        std::vector<std::vector<double>> sums(kk, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.labels[i]);
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] == 0) {
                // Reseed an empty cluster to the point farthest from its centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d =
                        sq_dist(points[i], centroids[static_cast<std::size_t>(res.labels[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c] = points[far];
            } else {
                for (std::size_t d = 0; d < dim; ++d)
                    centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
            }
        }
    }
    res.centroids = std::move(centroids);
    return res;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int restarts) {
    if (points.empty()) throw BadK("kmeans: no points");
    if (k < 1 || static_cast<std::size_t>(k) > points.size())
        throw BadK("kmeans: k must be in [1, n]");
    const std::size_t dim = points[0].size();
    for (const auto& pt : points)
        if (pt.size() != dim) throw DimensionMismatch("kmeans: ragged feature vectors");
    if (restarts < 1) restarts = 1;

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        KMeansResult run = lloyd_run(points, k, Rng::mix(seed, static_cast<std::uint64_t>(r)));
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::SumThetaEta: return "sum-theta-eta";
        case FeatureKind::SumThetaEtaBeta: return "sum-theta-eta-beta";
        case FeatureKind::SumThetaNonzero: return "sum-theta-nonzero";
        case FeatureKind::SumPNonzero: return "sum-p-nonzero";
        case FeatureKind::LastDKL: return "last-dkl";
        case FeatureKind::UnfoldedP: return "unfolded-p";
        case FeatureKind::UnfoldedThetaEta: return "unfolded-theta-eta";
        case FeatureKind::BetaThetaEta: return "beta-theta-eta";
    }
    return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "sum-theta-eta") return FeatureKind::SumThetaEta;
    if (name == "sum-theta-eta-beta") return FeatureKind::SumThetaEtaBeta;
    if (name == "sum-theta-nonzero") return FeatureKind::SumThetaNonzero;
    if (name == "sum-p-nonzero") return FeatureKind::SumPNonzero;
    if (name == "last-dkl") return FeatureKind::LastDKL;
    if (name == "unfolded-p") return FeatureKind::UnfoldedP;
    if (name == "unfolded-theta-eta") return FeatureKind::UnfoldedThetaEta;
    if (name == "beta-theta-eta") return FeatureKind::BetaThetaEta;
    throw UnknownKind("unknown feature kind: " + name);
}

namespace {

std::string grid_tag(const std::vector<int>& shape, int stacked) {
    std::string tag = "[";
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k) tag += 'x';
        tag += std::to_string(shape[k]);
    }
    if (stacked > 1) tag += 'x' + std::to_string(stacked);
    tag += ",1]";
    return tag;
}

}  // namespace

FeatureVector extract_features(const DecompositionState& state,
                               const DecompositionResult& result, FeatureKind kind) {
    FeatureVector fv;
    fv.kind = kind;

    const auto count_nonzero = [&state] {
        double c = 0.0;
        for (double v : state.p.values())
            if (v != 0.0) c += 1.0;
        return c;
    };

    switch (kind) {
        case FeatureKind::SumThetaEta:
            fv.values = {state.theta.sum(), state.eta.sum()};
            fv.shape_tag = "[1x2,1]";
            break;
        case FeatureKind::SumThetaEtaBeta: {
            double st = 0.0, se = 0.0;
            for (std::size_t flat : result.basis.flat_indices(state.theta.shape())) {
                st += state.theta[flat];
                se += state.eta[flat];
            }
            fv.values = {st, se};
            fv.shape_tag = "[1x2,1]";
            break;
        }
        case FeatureKind::SumThetaNonzero:
            fv.values = {state.theta.sum(), count_nonzero()};
            fv.shape_tag = "[1x2,1]";
            break;
        case FeatureKind::SumPNonzero:
            fv.values = {state.p.sum(), count_nonzero()};
            fv.shape_tag = "[1x2,1]";
            break;
        case FeatureKind::LastDKL:
            fv.values = {result.kl};
            fv.shape_tag = "[1,1]";
            break;
        case FeatureKind::UnfoldedP:
            fv.values.assign(state.p.values().begin(), state.p.values().end());
            fv.shape_tag = grid_tag(state.p.shape(), 1);
            break;
        case FeatureKind::UnfoldedThetaEta:
            fv.values.assign(state.theta.values().begin(), state.theta.values().end());
            fv.values.insert(fv.values.end(), state.eta.values().begin(),
                             state.eta.values().end());
            fv.shape_tag = grid_tag(state.theta.shape(), 2);
            break;
        case FeatureKind::BetaThetaEta: {
            const auto flats = result.basis.flat_indices(state.theta.shape());
            fv.values.reserve(2 * flats.size());
            for (std::size_t flat : flats) fv.values.push_back(state.theta[flat]);
            for (std::size_t flat : flats) fv.values.push_back(state.eta[flat]);
            fv.shape_tag = "[" + std::to_string(flats.size()) + "x2,1]";
            break;
        }
    }
    return fv;
}

}  // namespace legendre
