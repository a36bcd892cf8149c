#include "msde/mean_shift.hpp"

#include "msde/logging.hpp"

namespace msde {

void ShiftParams::validate() const {
    auto bad = [](const std::string& msg) { throw Error(Module::MeanShift, ErrorKind::Usage, msg); };
    if (k < 1) bad(fmt::format("k must be >= 1, got {}", k));
    if (!(eta > 0.0 && eta <= 1.0)) bad(fmt::format("eta must lie in (0, 1], got {}", eta));
    if (max_iters < 0) bad(fmt::format("max_iters must be >= 0, got {}", max_iters));
    if (!(tol > 0.0)) bad(fmt::format("tol must be > 0, got {}", tol));
    if (t_nbd < 1) bad(fmt::format("t_nbd must be >= 1, got {}", t_nbd));
    if (k_umap < 2) bad(fmt::format("k_umap must be >= 2, got {}", k_umap));
}

ShiftedEmbeddings run_shift(const EmbeddingMatrix& points, const ShiftParams& params, const ShiftObserver& observer) {
    params.validate();
    if (points.n_samples() < 2)
        throw Error(Module::MeanShift, ErrorKind::Data,
                    fmt::format("shift needs at least 2 samples, got {}", points.n_samples()));

    ShiftedEmbeddings out;
    out.points = points;
    if (params.max_iters == 0) return out;

    out.weights_used = compute_empirical_weights(points.values, params.t_nbd, params.k_umap);
    const auto& w = out.weights_used->weights;

    RowMatrix<double> current = points.values;
    std::optional<NeighborGraph<double>> graph;
    for (Index t = 1; t <= params.max_iters; ++t) {
        if (!graph || !params.static_graph) graph = build_knn_graph(current, params.k);
        auto step = shift_step(current, *graph, w, params.eta);
        current = std::move(step.points);
        out.trace.deltas.push_back(step.mean_displacement);
        out.trace.iterations_run = t;
        logger()->debug("shift iteration {}: mean displacement {}", t, step.mean_displacement);
        if (observer) observer(t, step.mean_displacement);
        if (step.mean_displacement < params.tol) {
            out.trace.converged = true;
            break;
        }
    }
    out.points.values = std::move(current);
    return out;
}

JointShiftResult joint_shift(const DatasetSplit& split, const ShiftParams& params, bool skip_solo,
                             const ShiftObserver& solo_observer, const ShiftObserver& joint_observer) {
    split.validate();
    JointShiftResult r;
    if (!skip_solo) r.train_solo = run_shift(split.train, params, solo_observer);

    const Index m = split.test.n_samples();
    if (m == 0) {
        r.joint = skip_solo ? run_shift(split.train, params, joint_observer) : r.train_solo;
        r.test_shifted = split.test;
        return r;
    }
    const auto all = concat_rows(split.train, split.test, "train/", "test/");
    r.joint = run_shift(all, params, joint_observer);
    r.test_shifted = split.test.with_values(r.joint.points.values.bottomRows(m));
    return r;
}

}  // namespace msde
