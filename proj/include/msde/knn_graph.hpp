#ifndef MSDE_KNN_GRAPH_HPP
#define MSDE_KNN_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "msde/common.hpp"
#include "msde/logging.hpp"
#include "msde/parallel.hpp"
#include "msde/types.hpp"

namespace msde {

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// k nearest other samples per row, nearest first. Ties are broken by lower index.
template <typename Scalar>
struct NeighborGraph {
    Index k = 0;
    IndexMatrix neighbors;       // n x k
    RowMatrix<Scalar> distances;  // n x k, Euclidean
    bool k_clamped = false;

    Index n_samples() const { return neighbors.rows(); }
};

template <typename Scalar>
struct DistanceExtremes {
    Scalar d_min = 0;
    Scalar d_max = 0;
};

/// Squared Euclidean distance between two rows, summed in column order.
/// A plain loop keeps the result bitwise symmetric and independent of alignment.
template <typename Scalar>
Scalar squared_distance(const RowMatrix<Scalar>& points, Index a, Index b) {
    const Scalar* pa = points.data() + a * points.cols();
    const Scalar* pb = points.data() + b * points.cols();
    Scalar acc = 0;
    for (Index j = 0; j < points.cols(); ++j) {
        const Scalar diff = pa[j] - pb[j];
        acc += diff * diff;
    }
    return acc;
}

namespace detail {

template <typename Scalar>
using Candidate = std::pair<Scalar, Index>;  // (squared distance, index); lexicographic order

inline Index clamp_k(Index k, Index n, Module module) {
    if (n < 2)
        throw Error(module, ErrorKind::Data, fmt::format("neighbor search needs at least 2 samples, got {}", n));
    if (k < 1) throw Error(module, ErrorKind::Usage, fmt::format("k must be >= 1, got {}", k));
    if (k > n - 1) {
        logger()->warn("k={} exceeds n-1={}; clamping", k, n - 1);
        return n - 1;
    }
    return k;
}

template <typename Scalar>
NeighborGraph<Scalar> make_graph(Index n, Index k, bool clamped) {
    NeighborGraph<Scalar> g;
    g.k = k;
    g.k_clamped = clamped;
    g.neighbors.resize(n, k);
    g.distances.resize(n, k);
    return g;
}

template <typename Scalar>
void store_row(NeighborGraph<Scalar>& g, Index row, const std::vector<Candidate<Scalar>>& sorted) {
    for (Index c = 0; c < g.k; ++c) {
        g.neighbors(row, c) = sorted[static_cast<std::size_t>(c)].second;
        g.distances(row, c) = std::sqrt(sorted[static_cast<std::size_t>(c)].first);
    }
}

/// Bounded max-heap of the k best candidates seen so far.
template <typename Scalar>
class KBest {
public:
    explicit KBest(Index k) : k_(static_cast<std::size_t>(k)) { heap_.reserve(k_ + 1); }

    bool full() const { return heap_.size() == k_; }
    Scalar worst() const { return heap_.front().first; }

    void offer(Scalar sq, Index idx) {
        const Candidate<Scalar> c{sq, idx};
        if (heap_.size() < k_) {
            heap_.push_back(c);
            std::push_heap(heap_.begin(), heap_.end());
        } else if (c < heap_.front()) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = c;
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    std::vector<Candidate<Scalar>> sorted() && {
        std::sort_heap(heap_.begin(), heap_.end());
        return std::move(heap_);
    }

private:
    std::size_t k_;
    std::vector<Candidate<Scalar>> heap_;
};

}  // namespace detail

/// Exact KD-tree over the rows of a point matrix. The matrix must outlive the tree.
template <typename Scalar>
class KdTree {
public:
    explicit KdTree(const RowMatrix<Scalar>& points, Index leaf_size = 16)
        : points_(points), leaf_size_(std::max<Index>(leaf_size, 1)), order_(static_cast<std::size_t>(points.rows())) {
        std::iota(order_.begin(), order_.end(), Index{0});
        if (points.rows() > 0) build(0, points.rows());
    }

    /// The k nearest rows to row `query`, excluding the query itself, sorted by (distance, index).
    std::vector<detail::Candidate<Scalar>> nearest_excluding(Index query, Index k) const {
        detail::KBest<Scalar> best(k);
        if (!nodes_.empty()) search(0, query, best);
        return std::move(best).sorted();
    }

private:
    struct Node {
        Index begin = 0;
        Index end = 0;
        Index split_dim = -1;  // -1 marks a leaf
        Scalar split_value = 0;
        Index left = -1;
        Index right = -1;
    };

    Index build(Index begin, Index end) {
        const auto id = static_cast<Index>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= leaf_size_) return id;

        Index best_dim = 0;
        Scalar best_spread = -1;
        for (Index j = 0; j < points_.cols(); ++j) {
            Scalar lo = std::numeric_limits<Scalar>::max();
            Scalar hi = std::numeric_limits<Scalar>::lowest();
            for (Index i = begin; i < end; ++i) {
                const Scalar v = points_(order_[static_cast<std::size_t>(i)], j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = j;
            }
        }
        if (best_spread <= 0) return id;  // all coincident: keep as a leaf

        const Index mid = begin + (end - begin) / 2;
        auto first = order_.begin() + begin;
        std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
            const Scalar va = points_(a, best_dim);
            const Scalar vb = points_(b, best_dim);
            return va < vb || (va == vb && a < b);
        });
        const Scalar split = points_(order_[static_cast<std::size_t>(mid)], best_dim);
        const Index left = build(begin, mid);
        const Index right = build(mid, end);
        Node& node = nodes_[static_cast<std::size_t>(id)];
        node.split_dim = best_dim;
        node.split_value = split;
        node.left = left;
        node.right = right;
        return id;
    }

    void search(Index node_id, Index query, detail::KBest<Scalar>& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (node.split_dim < 0) {
            for (Index i = node.begin; i < node.end; ++i) {
                const Index idx = order_[static_cast<std::size_t>(i)];
                if (idx == query) continue;
                best.offer(squared_distance(points_, query, idx), idx);
            }
            return;
        }
        // Left holds coordinates <= split, right holds >= split.
        const Scalar diff = points_(query, node.split_dim) - node.split_value;
        const Index near = diff < 0 ? node.left : node.right;
        const Index far = diff < 0 ? node.right : node.left;
        search(near, query, best);
        // Visit on equality so an equal-distance lower index can still win the tie.
        if (!best.full() || diff * diff <= best.worst()) search(far, query, best);
    }

    const RowMatrix<Scalar>& points_;
    Index leaf_size_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
};

/// Dimension above which build_knn_graph switches from the KD-tree to a linear scan.
inline constexpr Index kKdTreeMaxDim = 32;

/// Naive O(n^2 d) scan: every pairwise distance, fully sorted. Test oracle for build_knn_graph.
template <typename Scalar>
NeighborGraph<Scalar> brute_force_knn(const RowMatrix<Scalar>& points, Index k) {
    const Index n = points.rows();
    const Index k_eff = detail::clamp_k(k, n, Module::KnnGraph);
    auto g = detail::make_graph<Scalar>(n, k_eff, k_eff != k);
    parallel_for(n, [&](Index i) {
        std::vector<detail::Candidate<Scalar>> all;
        all.reserve(static_cast<std::size_t>(n - 1));
        for (Index j = 0; j < n; ++j)
            if (j != i) all.emplace_back(squared_distance(points, i, j), j);
        std::sort(all.begin(), all.end());
        detail::store_row(g, i, all);
    });
    return g;
}

/// Exact k-NN graph without self loops. Uses a KD-tree up to kKdTreeMaxDim dimensions and a
/// bounded-heap linear scan above it. If k > n-1 it is clamped and the graph is flagged.
template <typename Scalar>
NeighborGraph<Scalar> build_knn_graph(const RowMatrix<Scalar>& points, Index k) {
    const Index n = points.rows();
    const Index k_eff = detail::clamp_k(k, n, Module::KnnGraph);
    auto g = detail::make_graph<Scalar>(n, k_eff, k_eff != k);
    if (points.cols() <= kKdTreeMaxDim) {
        const KdTree<Scalar> tree(points);
        parallel_for(n, [&](Index i) { detail::store_row(g, i, tree.nearest_excluding(i, k_eff)); });
    } else {
        parallel_for(n, [&](Index i) {
            detail::KBest<Scalar> best(k_eff);
            for (Index j = 0; j < n; ++j)
                if (j != i) best.offer(squared_distance(points, i, j), j);
            detail::store_row(g, i, std::move(best).sorted());
        });
    }
    return g;
}

/// Exact minimum and maximum Euclidean distance over distinct pairs.
template <typename Scalar>
DistanceExtremes<Scalar> distance_extremes(const RowMatrix<Scalar>& points) {
    const Index n = points.rows();
    if (n < 2)
        throw Error(Module::KnnGraph, ErrorKind::Data, fmt::format("distance extremes need at least 2 samples, got {}", n));
    constexpr Index kBlock = 64;
    const Index n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<Scalar> block_min(static_cast<std::size_t>(n_blocks), std::numeric_limits<Scalar>::max());
    std::vector<Scalar> block_max(static_cast<std::size_t>(n_blocks), 0);
    parallel_for(n_blocks, [&](Index b) {
        Scalar lo = std::numeric_limits<Scalar>::max();
        Scalar hi = 0;
        const Index row_end = std::min(n, (b + 1) * kBlock);
        for (Index jb = b * kBlock; jb < n; jb += kBlock) {
            const Index col_end = std::min(n, jb + kBlock);
            for (Index i = b * kBlock; i < row_end; ++i)
                for (Index j = std::max(jb, i + 1); j < col_end; ++j) {
                    const Scalar sq = squared_distance(points, i, j);
                    lo = std::min(lo, sq);
                    hi = std::max(hi, sq);
                }
        }
        block_min[static_cast<std::size_t>(b)] = lo;
        block_max[static_cast<std::size_t>(b)] = hi;
    });
    return {std::sqrt(*std::min_element(block_min.begin(), block_min.end())),
            std::sqrt(*std::max_element(block_max.begin(), block_max.end()))};
}

/// Number of other rows at distance strictly less than radius from row center.
template <typename Scalar>
Index count_within_radius(const RowMatrix<Scalar>& points, Index center, Scalar radius) {
    if (center < 0 || center >= points.rows())
        throw Error(Module::KnnGraph, ErrorKind::Usage,
                    fmt::format("center index {} out of range [0, {})", center, points.rows()));
    if (radius < 0) throw Error(Module::KnnGraph, ErrorKind::Usage, "radius must be >= 0");
    Index count = 0;
    for (Index j = 0; j < points.rows(); ++j)
        if (j != center && std::sqrt(squared_distance(points, center, j)) < radius) ++count;
    return count;
}

inline NeighborGraph<double> build_knn_graph(const EmbeddingMatrix& points, Index k) {
    return build_knn_graph(points.values, k);
}
inline NeighborGraph<double> brute_force_knn(const EmbeddingMatrix& points, Index k) {
    return brute_force_knn(points.values, k);
}
inline DistanceExtremes<double> distance_extremes(const EmbeddingMatrix& points) {
    return distance_extremes(points.values);
}
inline Index count_within_radius(const EmbeddingMatrix& points, Index center, double radius) {
    return count_within_radius(points.values, center, radius);
}

}  // namespace msde

#endif  // MSDE_KNN_GRAPH_HPP
