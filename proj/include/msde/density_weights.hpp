#ifndef MSDE_DENSITY_WEIGHTS_HPP
#define MSDE_DENSITY_WEIGHTS_HPP

#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "msde/common.hpp"
#include "msde/knn_graph.hpp"
#include "msde/logging.hpp"
#include "msde/parallel.hpp"
#include "msde/types.hpp"

namespace msde {

template <typename Scalar>
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

/// UMAP-style fuzzy simplicial set over a k-NN graph.
template <typename Scalar>
struct FuzzyGraph {
    Index k_umap = 0;
    SparseRows<Scalar> directed;     // a_ij, row i holds i's neighbor memberships
    SparseRows<Scalar> memberships;  // G = A + A^T - A o A^T
    Vector<Scalar> rho;              // distance to nearest neighbor
    Vector<Scalar> sigma;            // per-sample bandwidth

    Index n_samples() const { return memberships.rows(); }
};

inline constexpr double kSigmaLowerBracket = 1e-10;
inline constexpr int kSigmaBisectionSteps = 64;
inline constexpr int kRadiusBisectionSteps = 60;
inline constexpr double kRadiusFloor = 1e-6;
inline constexpr double kZeroDistanceBracket = 1e-12;
inline constexpr double kSatisfiabilityFraction = 0.3;
inline constexpr int kScales = 4;

/// Base radius plus the four shrinking radii used for multi-scale counting.
template <typename Scalar>
struct RadiusSchedule {
    Scalar epsilon = 0;
    Scalar delta = 0;
    std::array<Scalar, kScales> radii{};
    Index t_nbd = 0;  // threshold actually used (after clamping)
    bool t_nbd_clamped = false;
};

template <typename Scalar>
struct DensityWeights {
    Vector<Scalar> weights;
    Eigen::Matrix<Index, Eigen::Dynamic, kScales, Eigen::RowMajor> counts;  // per sample, per radius
    RadiusSchedule<Scalar> schedule;
    double satisfied_fraction = 0.0;
};

// ---------------------------------------------------------------------------
// Fuzzy graph

namespace detail {

/// Sum of memberships exp(-max(0, d - rho) / sigma) over one neighbor row.
template <typename Scalar>
Scalar membership_sum(const RowMatrix<Scalar>& dists, Index row, Scalar rho, Scalar sigma) {
    Scalar sum = 0;
    for (Index c = 0; c < dists.cols(); ++c) sum += std::exp(-std::max(Scalar(0), dists(row, c) - rho) / sigma);
    return sum;
}

}  // namespace detail

/// Builds the fuzzy graph. sigma_i solves sum_j exp(-max(0, d_ij - rho_i)/sigma_i) = log2(k)
/// over all k neighbors (the nearest contributes exactly 1), found by bisection on
/// [1e-10, 1e3 * d_ik].
template <typename Scalar>
FuzzyGraph<Scalar> build_fuzzy_graph(const RowMatrix<Scalar>& points, Index k_umap) {
    const Index n = points.rows();
    if (n < 2)
        throw Error(Module::DensityWeights, ErrorKind::Data,
                    fmt::format("fuzzy graph needs at least 2 samples, got {}", n));
    if (k_umap < 2)
        throw Error(Module::DensityWeights, ErrorKind::Usage, fmt::format("k_umap must be >= 2, got {}", k_umap));

    const auto knn = build_knn_graph(points, k_umap);
    const Index k = knn.k;
    const Scalar target = std::log2(static_cast<Scalar>(k));

    FuzzyGraph<Scalar> g;
    g.k_umap = k;
    g.rho.resize(n);
    g.sigma.resize(n);
    parallel_for(n, [&](Index i) {
        const Scalar rho = knn.distances(i, 0);
        Scalar lo = Scalar(kSigmaLowerBracket);
        Scalar hi = std::max(knn.distances(i, k - 1) * Scalar(1e3), lo);
        for (int step = 0; step < kSigmaBisectionSteps; ++step) {
            const Scalar mid = (lo + hi) / 2;
            if (detail::membership_sum(knn.distances, i, rho, mid) > target) hi = mid;
            else lo = mid;
        }
        g.rho(i) = rho;
        g.sigma(i) = (lo + hi) / 2;
    });

    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(n * k));
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < k; ++c) {
            const Scalar a = std::exp(-std::max(Scalar(0), knn.distances(i, c) - g.rho(i)) / g.sigma(i));
            triplets.emplace_back(i, knn.neighbors(i, c), a);
        }
    g.directed.resize(n, n);
    g.directed.setFromTriplets(triplets.begin(), triplets.end());
    const SparseRows<Scalar> transposed = g.directed.transpose();
    g.memberships = g.directed + transposed - g.directed.cwiseProduct(transposed);
    g.memberships.makeCompressed();
    return g;
}

// ---------------------------------------------------------------------------
// Row-distance providers. Each fills the Euclidean distance from row i to every
// row (the entry for i itself is left at 0 and never counted).

/// Dense points: rows are coordinates.
template <typename Scalar>
struct DenseRowDistances {
    const RowMatrix<Scalar>& points;

    Index size() const { return points.rows(); }
    void operator()(Index i, std::vector<Scalar>& out) const {
        out.assign(static_cast<std::size_t>(points.rows()), Scalar(0));
        for (Index j = 0; j < points.rows(); ++j)
            if (j != i) out[static_cast<std::size_t>(j)] = std::sqrt(squared_distance(points, i, j));
    }
};

/// Sparse rows of G treated as n-dimensional coordinates.
template <typename Scalar>
struct SparseRowDistances {
    const SparseRows<Scalar>& rows;

    Index size() const { return rows.rows(); }

    /// Exact Euclidean distance over the union of supports, summed in column order.
    Scalar distance(Index a, Index b) const {
        typename SparseRows<Scalar>::InnerIterator ia(rows, a);
        typename SparseRows<Scalar>::InnerIterator ib(rows, b);
        Scalar acc = 0;
        while (ia || ib) {
            Scalar diff;
            if (ia && (!ib || ia.index() < ib.index())) {
                diff = ia.value();
                ++ia;
            } else if (ib && (!ia || ib.index() < ia.index())) {
                diff = -ib.value();
                ++ib;
            } else {
                diff = ia.value() - ib.value();
                ++ia;
                ++ib;
            }
            acc += diff * diff;
        }
        return std::sqrt(acc);
    }

    void operator()(Index i, std::vector<Scalar>& out) const {
        out.assign(static_cast<std::size_t>(rows.rows()), Scalar(0));
        for (Index j = 0; j < rows.rows(); ++j)
            if (j != i) out[static_cast<std::size_t>(j)] = distance(i, j);
    }
};

// ---------------------------------------------------------------------------
// Radius search

/// Per-sample distance to its t-th nearest other sample. A sample has at least t other
/// samples strictly inside eps exactly when this distance is < eps, which makes the
/// satisfiability predicate monotone in eps.
template <typename Scalar>
class SatisfiabilityIndex {
public:
    template <typename RowDistances>
    SatisfiabilityIndex(const RowDistances& dist, Index t_nbd) : t_nbd_(t_nbd) {
        const Index n = dist.size();
        kth_.assign(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
        row_min_.assign(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
        row_max_.assign(static_cast<std::size_t>(n), Scalar(0));
        parallel_for(n, [&](Index i) {
            std::vector<Scalar> d;
            dist(i, d);
            d.erase(d.begin() + i);
            const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
            row_min_[static_cast<std::size_t>(i)] = *mn;
            row_max_[static_cast<std::size_t>(i)] = *mx;
            if (t_nbd <= n - 1) {
                std::nth_element(d.begin(), d.begin() + (t_nbd - 1), d.end());
                kth_[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(t_nbd - 1)];
            }
        });
    }

    Index t_nbd() const { return t_nbd_; }
    Scalar d_min() const { return *std::min_element(row_min_.begin(), row_min_.end()); }
    Scalar d_max() const { return *std::max_element(row_max_.begin(), row_max_.end()); }

    /// Samples with at least t_nbd others at distance < eps.
    Index satisfied(Scalar eps) const {
        return static_cast<Index>(std::count_if(kth_.begin(), kth_.end(), [eps](Scalar v) { return v < eps; }));
    }

private:
    Index t_nbd_;
    std::vector<Scalar> kth_;
    std::vector<Scalar> row_min_;
    std::vector<Scalar> row_max_;
};

/// Four radii eps - r*delta, r = 0..3, with delta = (eps - floor)/4 and floor = 1e-6.
/// For eps <= 2e-6 the floor shrinks to eps/2 so the radii stay positive and decreasing.
template <typename Scalar>
RadiusSchedule<Scalar> make_schedule(Scalar epsilon) {
    RadiusSchedule<Scalar> s;
    s.epsilon = epsilon;
    const Scalar floor = std::min(Scalar(kRadiusFloor), epsilon / 2);
    s.delta = (epsilon - floor) / kScales;
    for (int r = 0; r < kScales; ++r) s.radii[static_cast<std::size_t>(r)] = epsilon - Scalar(r) * s.delta;
    return s;
}

/// Smallest eps in [d_min, d_max] (bisection, 60 steps) such that at least
/// ceil(target_fraction * n) samples have >= t_nbd others strictly within eps.
/// When no eps can satisfy t_nbd it is clamped to max(1, floor((n-1)/2)) with a warning.
template <typename Scalar, typename RowDistances>
RadiusSchedule<Scalar> search_radius_with(const RowDistances& dist, Index t_nbd, double target_fraction) {
    const Index n = dist.size();
    if (n < 2)
        throw Error(Module::DensityWeights, ErrorKind::Data,
                    fmt::format("radius search needs at least 2 samples, got {}", n));
    if (t_nbd < 1) throw Error(Module::DensityWeights, ErrorKind::Usage, "t_nbd must be >= 1");
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw Error(Module::DensityWeights, ErrorKind::Usage, "target fraction must lie in (0, 1)");

    const auto required = static_cast<Index>(std::ceil(target_fraction * static_cast<double>(n)));
    SatisfiabilityIndex<Scalar> index(dist, t_nbd);
    const Scalar d_max = index.d_max();
    // Strict counting never admits a pair at exactly d_max, so probe just above it.
    const Scalar upper = d_max * Scalar(1 + 1e-9) + Scalar(kZeroDistanceBracket);

    bool clamped = false;
    if (index.satisfied(upper) < required) {
        const Index t_new = std::max<Index>(1, (n - 1) / 2);
        logger()->warn("t_nbd={} unreachable with {} samples; clamping to {}", t_nbd, n, t_new);
        index = SatisfiabilityIndex<Scalar>(dist, t_new);
        clamped = true;
    }

    Scalar lo = std::max(index.d_min(), Scalar(kZeroDistanceBracket));
    Scalar hi = std::max(upper, lo);
    Scalar eps = lo;
    if (index.satisfied(lo) < required) {
        for (int step = 0; step < kRadiusBisectionSteps; ++step) {
            const Scalar mid = lo + (hi - lo) / 2;
            if (index.satisfied(mid) >= required) hi = mid;
            else lo = mid;
        }
        eps = hi;
    }
    auto schedule = make_schedule(eps);
    schedule.t_nbd = index.t_nbd();
    schedule.t_nbd_clamped = clamped;
    return schedule;
}

template <typename Scalar>
RadiusSchedule<Scalar> search_radius(const RowMatrix<Scalar>& graph_points, Index t_nbd,
                                     double target_fraction = kSatisfiabilityFraction) {
    return search_radius_with<Scalar>(DenseRowDistances<Scalar>{graph_points}, t_nbd, target_fraction);
}

/// Fraction of samples with >= t_nbd others strictly within eps.
template <typename Scalar>
double satisfied_fraction(const RowMatrix<Scalar>& graph_points, Index t_nbd, Scalar eps) {
    const SatisfiabilityIndex<Scalar> index(DenseRowDistances<Scalar>{graph_points}, t_nbd);
    return static_cast<double>(index.satisfied(eps)) / static_cast<double>(graph_points.rows());
}

// ---------------------------------------------------------------------------
// Multi-scale counting

/// Strict-radius neighbor counts at each radius of the schedule; weight = mean of the counts.
template <typename Scalar, typename RowDistances>
DensityWeights<Scalar> count_scales(const RowDistances& dist, const RadiusSchedule<Scalar>& schedule) {
    const Index n = dist.size();
    DensityWeights<Scalar> w;
    w.schedule = schedule;
    w.counts.resize(n, kScales);
    w.weights.resize(n);
    std::vector<char> satisfied(static_cast<std::size_t>(n), 0);
    parallel_for(n, [&](Index i) {
        std::vector<Scalar> d;
        dist(i, d);
        std::array<Index, kScales> c{};
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            for (int r = 0; r < kScales; ++r)
                if (d[static_cast<std::size_t>(j)] < schedule.radii[static_cast<std::size_t>(r)]) ++c[static_cast<std::size_t>(r)];
        }
        Index total = 0;
        for (int r = 0; r < kScales; ++r) {
            w.counts(i, r) = c[static_cast<std::size_t>(r)];
            total += c[static_cast<std::size_t>(r)];
        }
        w.weights(i) = static_cast<Scalar>(total) / Scalar(kScales);
        satisfied[static_cast<std::size_t>(i)] = c[0] >= schedule.t_nbd;
    });
    w.satisfied_fraction =
        static_cast<double>(std::count(satisfied.begin(), satisfied.end(), 1)) / static_cast<double>(n);
    return w;
}

/// Empirical density weights: fuzzy graph, rows of G as graph-space coordinates,
/// radius search at 30% satisfiability, then counts averaged over four shrinking radii.
template <typename Scalar>
DensityWeights<Scalar> compute_empirical_weights(const RowMatrix<Scalar>& points, Index t_nbd, Index k_umap) {
    const auto graph = build_fuzzy_graph(points, k_umap);
    const SparseRowDistances<Scalar> dist{graph.memberships};
    const auto schedule = search_radius_with<Scalar>(dist, t_nbd, kSatisfiabilityFraction);
    return count_scales(dist, schedule);
}

inline FuzzyGraph<double> build_fuzzy_graph(const EmbeddingMatrix& points, Index k_umap) {
    return build_fuzzy_graph(points.values, k_umap);
}
inline RadiusSchedule<double> search_radius(const EmbeddingMatrix& graph_points, Index t_nbd,
                                            double target_fraction = kSatisfiabilityFraction) {
    return search_radius(graph_points.values, t_nbd, target_fraction);
}
inline DensityWeights<double> compute_empirical_weights(const EmbeddingMatrix& points, Index t_nbd, Index k_umap) {
    return compute_empirical_weights(points.values, t_nbd, k_umap);
}

}  // namespace msde

#endif  // MSDE_DENSITY_WEIGHTS_HPP
