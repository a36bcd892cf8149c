#ifndef MSDE_MEAN_SHIFT_HPP
#define MSDE_MEAN_SHIFT_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "msde/common.hpp"
#include "msde/density_weights.hpp"
#include "msde/knn_graph.hpp"
#include "msde/parallel.hpp"
#include "msde/types.hpp"

namespace msde {

/// Shift hyperparameters. Defaults are the fixed published settings.
struct ShiftParams {
    Index k = 50;
    double eta = 0.33;
    Index max_iters = 8;  // 0 disables shifting (no-shift baseline)
    double tol = 0.01;
    Index t_nbd = 70;
    Index k_umap = 15;
    bool static_graph = false;  // reuse the first k-NN graph across iterations

    void validate() const;
};

struct ShiftTrace {
    Index iterations_run = 0;
    std::vector<double> deltas;  // mean displacement per iteration
    bool converged = false;
};

struct ShiftedEmbeddings {
    EmbeddingMatrix points;
    ShiftTrace trace;
    std::optional<DensityWeights<double>> weights_used;  // absent when max_iters == 0
};

template <typename Scalar>
struct StepResult {
    RowMatrix<Scalar> points;
    Scalar mean_displacement = 0;
};

/// One synchronous weighted mean-shift step. Every target is computed from the
/// pre-step snapshot:
///   target_i = sum_j w_j x_j / sum_j w_j   over j in N(i)
///   x_i     += eta * (target_i - x_i)
/// A neighborhood whose weights sum to zero falls back to uniform weights.
/// Summation follows neighbor-list order, so results are bitwise stable.
template <typename Scalar>
StepResult<Scalar> shift_step(const RowMatrix<Scalar>& points, const NeighborGraph<Scalar>& graph,
                              const Vector<Scalar>& weights, Scalar eta) {
    const Index n = points.rows();
    const Index d = points.cols();
    if (graph.n_samples() != n || weights.size() != n)
        throw Error(Module::MeanShift, ErrorKind::Usage,
                    fmt::format("graph ({} rows) and weights ({}) do not match {} points", graph.n_samples(),
                                weights.size(), n));
    if (!(eta > 0 && eta <= 1))
        throw Error(Module::MeanShift, ErrorKind::Usage, fmt::format("eta must lie in (0, 1], got {}", eta));

    StepResult<Scalar> out;
    out.points.resize(n, d);
    std::vector<Scalar> moved(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index i) {
        Vector<Scalar> acc = Vector<Scalar>::Zero(d);
        Scalar total = 0;
        for (Index c = 0; c < graph.k; ++c) {
            const Index j = graph.neighbors(i, c);
            acc += weights(j) * points.row(j).transpose();
            total += weights(j);
        }
        if (total <= 0) {
            acc.setZero();
            for (Index c = 0; c < graph.k; ++c) acc += points.row(graph.neighbors(i, c)).transpose();
            total = static_cast<Scalar>(graph.k);
        }
        const Vector<Scalar> target = acc / total;
        // eta == 1 lands on the target exactly rather than via x + (target - x).
        if (eta == 1) out.points.row(i) = target.transpose();
        else out.points.row(i) = points.row(i) + eta * (target.transpose() - points.row(i));
        if (!out.points.row(i).allFinite())
            throw Error(Module::MeanShift, ErrorKind::Numeric, fmt::format("non-finite shifted value in row {}", i));
        Scalar sq = 0;
        for (Index j = 0; j < d; ++j) {
            const Scalar diff = out.points(i, j) - points(i, j);
            sq += diff * diff;
        }
        moved[static_cast<std::size_t>(i)] = std::sqrt(sq);
    });
    Scalar sum = 0;
    for (const Scalar m : moved) sum += m;
    out.mean_displacement = sum / static_cast<Scalar>(n);
    return out;
}

/// Called after each iteration with (iteration number starting at 1, mean displacement).
using ShiftObserver = std::function<void(Index, double)>;

/// Density weights once on the input, then up to max_iters rounds of
/// (rebuild k-NN graph, shift_step), stopping once the step's mean displacement < tol.
ShiftedEmbeddings run_shift(const EmbeddingMatrix& points, const ShiftParams& params,
                            const ShiftObserver& observer = {});

struct JointShiftResult {
    ShiftedEmbeddings train_solo;  // shift of train alone, used for fitting
    ShiftedEmbeddings joint;       // shift of train followed by test
    EmbeddingMatrix test_shifted;  // test rows of the joint run, original ids and labels
};

/// Solo shift of train plus a joint shift of train and test, returning the joint test rows.
/// With skip_solo the solo run is not performed and train_solo is left empty.
JointShiftResult joint_shift(const DatasetSplit& split, const ShiftParams& params, bool skip_solo = false,
                             const ShiftObserver& solo_observer = {}, const ShiftObserver& joint_observer = {});

}  // namespace msde

#endif  // MSDE_MEAN_SHIFT_HPP
