#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "msde/mean_shift.hpp"
#include "msde/parallel.hpp"
#include "oracles.hpp"

using namespace msde;
using msde::testing::capture_error;
using msde::testing::random_matrix;

namespace {

NeighborGraph<double> manual_graph(const std::vector<std::vector<Index>>& rows) {
    NeighborGraph<double> g;
    g.k = static_cast<Index>(rows.front().size());
    g.neighbors.resize(static_cast<Index>(rows.size()), g.k);
    g.distances.setZero(static_cast<Index>(rows.size()), g.k);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Index c = 0; c < g.k; ++c) g.neighbors(static_cast<Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    return g;
}

/// Weighted neighborhood mean accumulated coordinate by coordinate in neighbor order.
Vector<double> weighted_mean(const RowMatrix<double>& p, const NeighborGraph<double>& g, const Vector<double>& w, Index i) {
    Vector<double> acc = Vector<double>::Zero(p.cols());
    double total = 0.0;
    for (Index c = 0; c < g.k; ++c) {
        const Index j = g.neighbors(i, c);
        for (Index d = 0; d < p.cols(); ++d) acc(d) += w(j) * p(j, d);
        total += w(j);
    }
    return acc / total;
}

double diameter(const RowMatrix<double>& p, Index begin, Index end) {
    double best = 0.0;
    for (Index i = begin; i < end; ++i)
        for (Index j = i + 1; j < end; ++j) best = std::max(best, msde::testing::eigen_distance(p, i, j));
    return best;
}

ShiftParams small_params() {
    ShiftParams p;
    p.k = 8;
    p.t_nbd = 6;
    p.k_umap = 15;
    return p;
}

}  // namespace

TEST_CASE("weighted step on the canonical example") {
    RowMatrix<double> p(3, 2);
    p << 0, 0, 2, 0, 0, 0;
    const auto g = manual_graph({{1, 2}, {0, 2}, {0, 1}});
    Vector<double> w(3);
    w << 1, 3, 1;
    const auto r = shift_step(p, g, w, 0.33);
    CHECK(r.points(0, 0) == doctest::Approx(0.495).epsilon(1e-15));
    CHECK(r.points(0, 1) == 0.0);
    const auto full = shift_step(p, g, w, 1.0);
    CHECK(full.points(0, 0) == 1.5);
}

TEST_CASE("coincident neighborhood is a fixed point") {
    const RowMatrix<double> p = RowMatrix<double>::Constant(4, 3, -1.25);
    const auto g = manual_graph({{1, 2}, {0, 3}, {3, 1}, {0, 2}});
    Vector<double> w(4);
    w << 0.25, 7, 2.5, 1;
    const auto r = shift_step(p, g, w, 0.7);
    CHECK(r.points == p);
    CHECK(r.mean_displacement == 0.0);
}

TEST_CASE("uniform weights and zero weights give the plain centroid") {
    const auto p = random_matrix(6, 2, 4);
    const auto g = manual_graph({{1, 2, 3}, {0, 2, 4}, {0, 1, 5}, {0, 4, 5}, {1, 3, 5}, {2, 3, 4}});
    const Vector<double> ones = Vector<double>::Ones(6);
    const Vector<double> zeros = Vector<double>::Zero(6);
    const auto a = shift_step(p, g, ones, 1.0);
    const auto b = shift_step(p, g, zeros, 1.0);
    for (Index i = 0; i < 6; ++i) {
        Vector<double> centroid = Vector<double>::Zero(2);
        for (Index c = 0; c < 3; ++c) centroid += p.row(g.neighbors(i, c)).transpose();
        centroid /= 3.0;
        for (Index d = 0; d < 2; ++d) {
            CHECK(a.points(i, d) == doctest::Approx(centroid(d)).epsilon(1e-14));
            CHECK(b.points(i, d) == a.points(i, d));
        }
    }
}

TEST_CASE("eta of one lands exactly on the weighted mean") {
    const auto p = random_matrix(100, 5, 31);
    const auto g = build_knn_graph(p, 7);
    Vector<double> w(100);
    for (Index i = 0; i < 100; ++i) w(i) = 0.25 * static_cast<double>(i % 13);
    const auto r = shift_step(p, g, w, 1.0);
    for (Index i = 0; i < 100; ++i) {
        const Vector<double> target = weighted_mean(p, g, w, i);
        for (Index d = 0; d < 5; ++d) CHECK(r.points(i, d) == target(d));
    }
}

TEST_CASE("per-point displacement is bounded by eta times the farthest neighbor") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = random_matrix(80, 4, 500 + seed);
        const auto g = build_knn_graph(p, 9);
        Vector<double> w = random_matrix(80, 1, seed).col(0).cwiseAbs();
        const double eta = 0.05 + 0.09 * static_cast<double>(seed);
        const auto r = shift_step(p, g, w, eta);
        double mean_move = 0.0;
        for (Index i = 0; i < 80; ++i) {
            const double move = (r.points.row(i) - p.row(i)).norm();
            CHECK(move <= eta * g.distances(i, g.k - 1) * (1 + 1e-12));
            mean_move += move / 80.0;
        }
        CHECK(r.mean_displacement == doctest::Approx(mean_move).epsilon(1e-12));
    }
}

TEST_CASE("step argument checks") {
    const auto p = random_matrix(5, 2, 1);
    const auto g = build_knn_graph(p, 2);
    const Vector<double> w = Vector<double>::Ones(5);
    CHECK(capture_error([&] { shift_step(p, g, w, 0.0); }).has_value());
    CHECK(capture_error([&] { shift_step(p, g, w, 1.5); }).has_value());
    CHECK(capture_error([&] { shift_step(p, g, Vector<double>(Vector<double>::Ones(4)), 0.5); }).has_value());

    RowMatrix<double> huge = p;
    huge(0, 0) = 1e308;
    huge(1, 0) = 1e308;
    huge(2, 0) = 1e308;
    const auto gh = build_knn_graph(huge, 2);
    const auto e = capture_error([&] { shift_step(huge, gh, Vector<double>(Vector<double>::Constant(5, 1e300)), 0.5); });
    REQUIRE(e.has_value());
    CHECK(e->kind() == ErrorKind::Numeric);
}

TEST_CASE("vanishing eta leaves points in place and converges at once") {
    const auto x = EmbeddingMatrix::from_values(random_matrix(60, 3, 8));
    auto params = small_params();
    params.eta = 1e-12;
    params.tol = 1e-6;
    const auto r = run_shift(x, params);
    CHECK(r.trace.iterations_run == 1);
    CHECK(r.trace.converged);
    CHECK((r.points.values - x.values).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(r.points.row_ids == x.row_ids);
}

TEST_CASE("iteration bound and trace") {
    const auto x = EmbeddingMatrix::from_values(random_matrix(60, 3, 9));
    auto params = small_params();
    params.max_iters = 1;
    params.tol = 1e-30;
    std::vector<std::pair<Index, double>> seen;
    const auto r = run_shift(x, params, [&](Index t, double d) { seen.emplace_back(t, d); });
    CHECK(r.trace.iterations_run == 1);
    CHECK(r.trace.deltas.size() == 1);
    CHECK_FALSE(r.trace.converged);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0].first == 1);
    CHECK(seen[0].second == r.trace.deltas[0]);

    params.max_iters = 5;
    const auto r5 = run_shift(x, params);
    CHECK(r5.trace.iterations_run == 5);
    for (const double d : r5.trace.deltas) CHECK(d >= 0.0);
    REQUIRE(r5.weights_used.has_value());
    CHECK(r5.weights_used->weights.size() == 60);
}

TEST_CASE("zero iterations is the identity baseline") {
    const auto x = EmbeddingMatrix::from_values(random_matrix(30, 3, 10));
    auto params = small_params();
    params.max_iters = 0;
    const auto r = run_shift(x, params);
    CHECK(r.points.values == x.values);
    CHECK(r.trace.iterations_run == 0);
    CHECK_FALSE(r.weights_used.has_value());
}

TEST_CASE("parameter validation") {
    const auto x = EmbeddingMatrix::from_values(random_matrix(30, 3, 10));
    for (auto mutate : std::vector<std::function<void(ShiftParams&)>>{
             [](ShiftParams& p) { p.eta = 0.0; }, [](ShiftParams& p) { p.eta = 1.01; },
             [](ShiftParams& p) { p.tol = 0.0; }, [](ShiftParams& p) { p.k = 0; },
             [](ShiftParams& p) { p.max_iters = -1; }, [](ShiftParams& p) { p.t_nbd = 0; },
             [](ShiftParams& p) { p.k_umap = 1; }}) {
        auto params = small_params();
        mutate(params);
        const auto e = capture_error([&] { run_shift(x, params); });
        REQUIRE(e.has_value());
        CHECK(e->kind() == ErrorKind::Usage);
    }
    CHECK(capture_error([&] { run_shift(EmbeddingMatrix::from_values(random_matrix(1, 3, 1)), small_params()); })
              .has_value());
}

TEST_CASE("two separated blobs contract in place") {
    RowMatrix<double> p = 0.1 * random_matrix(60, 2, 77);
    p.bottomRows(30).col(0).array() += 10.0;
    auto params = small_params();
    params.k = 5;
    params.t_nbd = 5;
    params.max_iters = 8;
    const auto r = run_shift(EmbeddingMatrix::from_values(p), params);
    const auto& q = r.points.values;
    for (const Index begin : {Index{0}, Index{30}}) {
        CHECK(diameter(q, begin, begin + 30) < diameter(p, begin, begin + 30));
        const Eigen::RowVectorXd before = p.middleRows(begin, 30).colwise().mean();
        const Eigen::RowVectorXd after = q.middleRows(begin, 30).colwise().mean();
        CHECK((after - before).norm() < 0.5);
    }
}

TEST_CASE("synchronous update commutes with row permutation") {
    const Index n = 70;
    const auto p = random_matrix(n, 3, 41);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(2);
    std::shuffle(perm.begin(), perm.end(), rng);
    RowMatrix<double> q(n, 3);
    for (Index i = 0; i < n; ++i) q.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
    auto params = small_params();
    params.max_iters = 3;
    const auto rp = run_shift(EmbeddingMatrix::from_values(p), params);
    const auto rq = run_shift(EmbeddingMatrix::from_values(q), params);
    for (Index i = 0; i < n; ++i)
        CHECK((rq.points.values.row(i) - rp.points.values.row(perm[static_cast<std::size_t>(i)])).norm() <= 1e-12);
}

TEST_CASE("shift is bitwise stable across thread counts") {
    const auto x = EmbeddingMatrix::from_values(random_matrix(200, 6, 5));
    auto params = small_params();
    params.max_iters = 4;
    set_num_threads(1);
    const auto a = run_shift(x, params);
    set_num_threads(4);
    const auto b = run_shift(x, params);
    set_num_threads(1);
    CHECK(std::memcmp(a.points.values.data(), b.points.values.data(), sizeof(double) * 1200) == 0);
    CHECK(a.trace.deltas == b.trace.deltas);
}

TEST_CASE("joint shift with an empty test set equals the solo run") {
    DatasetSplit s;
    s.train = EmbeddingMatrix::from_values(random_matrix(40, 3, 6), "t");
    s.test = EmbeddingMatrix::from_values(RowMatrix<double>(0, 3));
    s.test.labels = std::vector<int>{};
    const auto r = joint_shift(s, small_params());
    CHECK(r.joint.points.values == r.train_solo.points.values);
    CHECK(r.test_shifted.empty());
}

TEST_CASE("duplicated test rows track their train twins exactly") {
    // Odd k keeps each twin pair together at every neighbor-list cutoff.
    DatasetSplit s;
    s.train = EmbeddingMatrix::from_values(random_matrix(50, 3, 12), "a");
    s.test = s.train.with_values(s.train.values);
    s.test.row_ids.clear();
    for (Index i = 0; i < 50; ++i) s.test.row_ids.push_back("b" + std::to_string(i));
    s.test.labels = std::vector<int>(50, 0);
    auto params = small_params();
    params.k = 11;
    params.k_umap = 15;
    params.max_iters = 4;
    const auto r = joint_shift(s, params);
    CHECK(r.test_shifted.row_ids == s.test.row_ids);
    CHECK(r.test_shifted.labels == s.test.labels);
    CHECK(r.test_shifted.values == r.joint.points.values.topRows(50));
    CHECK(r.joint.points.row_ids.front() == "train/a0");
    CHECK(r.joint.points.row_ids.back() == "test/b49");
}

TEST_CASE("joint run recomputes weights on the union") {
    DatasetSplit s;
    s.train = EmbeddingMatrix::from_values(random_matrix(40, 3, 13), "a");
    s.test = EmbeddingMatrix::from_values(random_matrix(10, 3, 14), "b");
    s.test.labels = std::vector<int>(10, 0);
    const auto r = joint_shift(s, small_params());
    REQUIRE(r.train_solo.weights_used.has_value());
    REQUIRE(r.joint.weights_used.has_value());
    CHECK(r.train_solo.weights_used->weights.size() == 40);
    CHECK(r.joint.weights_used->weights.size() == 50);
    CHECK(r.test_shifted.n_samples() == 10);
    CHECK(r.test_shifted.values == r.joint.points.values.bottomRows(10));

    const auto skipped = joint_shift(s, small_params(), true);
    CHECK(skipped.train_solo.points.empty());
    CHECK(skipped.test_shifted.values == r.test_shifted.values);
}
