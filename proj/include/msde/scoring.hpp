#ifndef MSDE_SCORING_HPP
#define MSDE_SCORING_HPP

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "msde/common.hpp"
#include "msde/logging.hpp"
#include "msde/parallel.hpp"

namespace msde {

/// Principal subspace of the training data.
template <typename Scalar>
struct PcaBasis {
    Vector<Scalar> center;               // input_dim
    RowMatrix<Scalar> components;         // reduced_dim x input_dim, orthonormal rows
    Vector<Scalar> explained_variance;    // reduced_dim, nonincreasing

    Index input_dim() const { return components.cols(); }
    Index reduced_dim() const { return components.rows(); }
};

/// Fits PCA from the eigendecomposition of the sample covariance (divisor n-1).
/// Each component is signed so that its largest-magnitude entry is positive.
/// reduced_dim is clamped to min(input_dim, n-1).
template <typename Scalar>
PcaBasis<Scalar> fit_pca(const RowMatrix<Scalar>& x, Index reduced_dim) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n < 2) throw Error(Module::Scoring, ErrorKind::Data, fmt::format("PCA needs at least 2 rows, got {}", n));
    if (reduced_dim < 1)
        throw Error(Module::Scoring, ErrorKind::Usage, fmt::format("PCA dimension must be >= 1, got {}", reduced_dim));
    const Index cap = std::min(d, n - 1);
    if (reduced_dim > cap) {
        logger()->warn("PCA dimension {} exceeds min(input_dim={}, n-1={}); clamping to {}", reduced_dim, d, n - 1, cap);
        reduced_dim = cap;
    }

    PcaBasis<Scalar> basis;
    basis.center = x.colwise().mean().transpose();
    const RowMatrix<Scalar> centered = x.rowwise() - basis.center.transpose();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov =
        (centered.transpose() * centered) / static_cast<Scalar>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> solver(cov);
    if (solver.info() != Eigen::Success)
        throw Error(Module::Scoring, ErrorKind::Numeric, "covariance eigendecomposition failed");

    // Eigen returns ascending eigenvalues; take them from the top.
    basis.components.resize(reduced_dim, d);
    basis.explained_variance.resize(reduced_dim);
    for (Index c = 0; c < reduced_dim; ++c) {
        const Index src = d - 1 - c;
        Vector<Scalar> v = solver.eigenvectors().col(src);
        Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v(pivot) < 0) v = -v;
        basis.components.row(c) = v.transpose();
        basis.explained_variance(c) = std::max(Scalar(0), solver.eigenvalues()(src));
    }
    return basis;
}

/// z = components * (x - center) for every row of x.
template <typename Scalar>
RowMatrix<Scalar> project(const PcaBasis<Scalar>& basis, const RowMatrix<Scalar>& x) {
    if (x.cols() != basis.input_dim())
        throw Error(Module::Scoring, ErrorKind::Data,
                    fmt::format("PCA fitted on dimension {} applied to dimension {}", basis.input_dim(), x.cols()));
    return (x.rowwise() - basis.center.transpose()) * basis.components.transpose();
}

/// Gaussian N(mu, Sigma + lambda I) in the reduced space.
template <typename Scalar>
struct GaussianModel {
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector<Scalar> mu;
    Dense sigma;      // regularized covariance
    Dense precision;  // explicit inverse, kept for inspection and serialization
    Scalar lambda = 0;
    Eigen::LLT<Dense> factor;  // Cholesky of sigma; all solves go through it

    Index dim() const { return mu.size(); }

    /// Recomputes the factorization and precision from sigma.
    void refactor() {
        factor.compute(sigma);
        if (factor.info() != Eigen::Success)
            throw Error(Module::Scoring, ErrorKind::Numeric, "regularized covariance is not positive definite");
        precision = factor.solve(Dense::Identity(sigma.rows(), sigma.cols()));
    }
};

/// mu = column mean, sigma = sample covariance (n-1) + lambda I.
template <typename Scalar>
GaussianModel<Scalar> fit_gaussian(const RowMatrix<Scalar>& z, Scalar lambda) {
    const Index n = z.rows();
    if (n < 2)
        throw Error(Module::Scoring, ErrorKind::Data, fmt::format("Gaussian fit needs at least 2 rows, got {}", n));
    if (!(lambda > 0))
        throw Error(Module::Scoring, ErrorKind::Usage, fmt::format("lambda must be > 0, got {}", lambda));
    GaussianModel<Scalar> g;
    g.lambda = lambda;
    g.mu = z.colwise().mean().transpose();
    const RowMatrix<Scalar> centered = z.rowwise() - g.mu.transpose();
    g.sigma = (centered.transpose() * centered) / static_cast<Scalar>(n - 1);
    g.sigma.diagonal().array() += lambda;
    g.refactor();
    return g;
}

/// sqrt((z - mu)^T Sigma^-1 (z - mu)) through the Cholesky factor: ||L^-1 (z - mu)||.
template <typename Scalar, typename Derived>
Scalar mahalanobis(const GaussianModel<Scalar>& g, const Eigen::MatrixBase<Derived>& z) {
    if (z.size() != g.dim())
        throw Error(Module::Scoring, ErrorKind::Data,
                    fmt::format("Gaussian of dimension {} given a vector of dimension {}", g.dim(), z.size()));
    Vector<Scalar> diff(g.dim());
    for (Index k = 0; k < g.dim(); ++k) diff(k) = z.derived().coeff(k) - g.mu(k);
    const Vector<Scalar> y = g.factor.matrixL().solve(diff);
    return std::sqrt(y.squaredNorm());
}

/// Mahalanobis distance of every row.
template <typename Scalar>
std::vector<Scalar> mahalanobis_rows(const GaussianModel<Scalar>& g, const RowMatrix<Scalar>& z) {
    std::vector<Scalar> out(static_cast<std::size_t>(z.rows()));
    parallel_for(z.rows(), [&](Index i) { out[static_cast<std::size_t>(i)] = mahalanobis(g, z.row(i)); });
    return out;
}

/// Fitted scorer: PCA basis plus the Gaussian of the projected training data.
template <typename Scalar>
struct GaussianScorer {
    PcaBasis<Scalar> basis;
    GaussianModel<Scalar> gaussian;

    std::vector<Scalar> score(const RowMatrix<Scalar>& x) const {
        return mahalanobis_rows(gaussian, project(basis, x));
    }
};

/// Logistic of the z-scored values, using the mean and population std of the input itself.
/// A spread below 1e-12 maps everything to 0.5.
template <typename Scalar>
std::vector<Scalar> normalize_scores(std::span<const Scalar> raw) {
    std::vector<Scalar> out(raw.size(), Scalar(0.5));
    if (raw.empty()) return out;
    Scalar mean = 0;
    for (const Scalar v : raw) mean += v;
    mean /= static_cast<Scalar>(raw.size());
    Scalar var = 0;
    for (const Scalar v : raw) var += (v - mean) * (v - mean);
    const Scalar sd = std::sqrt(var / static_cast<Scalar>(raw.size()));
    if (sd < Scalar(1e-12)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const Scalar v = (raw[i] - mean) / sd;
        out[i] = Scalar(1) / (Scalar(1) + std::exp(-v));
    }
    return out;
}

template <typename Scalar>
std::vector<Scalar> normalize_scores(const std::vector<Scalar>& raw) {
    return normalize_scores(std::span<const Scalar>(raw));
}

}  // namespace msde

#endif  // MSDE_SCORING_HPP
