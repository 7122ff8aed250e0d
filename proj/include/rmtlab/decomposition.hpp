#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "rmtlab/errors.hpp"

namespace rmtlab {

/// Eigen-decomposition A = Vᵀ·diag(λ)·V of a real symmetric matrix.
/// Rows of `eigenvectors` are the eigenvectors; eigenvalues are ascending.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
    int sweeps = 0;

    Eigen::Index size() const noexcept { return eigenvalues.size(); }
};

inline constexpr int jacobi_sweep_cap = 64;

/// Cyclic Jacobi rotation scheme. An off-diagonal entry is treated as zero once
/// |a_pq| ≤ ε·sqrt(|a_pp·a_qq|), which keeps small eigenvalues relatively accurate.
inline SpectralDecomposition eig_sym(const Eigen::MatrixXd& input)
{
    const Eigen::Index n = input.rows();
    if (input.cols() != n) {
        throw Error(Errc::invalid_argument, "eig_sym expects a square matrix");
    }
    if (!input.allFinite()) {
        throw Error(Errc::invalid_argument, "eig_sym input has non-finite entries");
    }
    const double scale = n == 0 ? 0.0 : input.cwiseAbs().maxCoeff();
    if (n > 0 && (input - input.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
        throw Error(Errc::invalid_argument, "eig_sym input is not symmetric");
    }

    Eigen::MatrixXd a = 0.5 * (input + input.transpose());
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double floor = std::numeric_limits<double>::min() / eps;

    int sweep = 0;
    for (;; ++sweep) {
        int rotations = 0;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double app = a(p, p);
                const double aqq = a(q, q);
                if (std::abs(apq) <= eps * std::sqrt(std::abs(app * aqq)) || std::abs(apq) <= floor) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                if (sweep >= jacobi_sweep_cap) {
                    throw Error(Errc::no_convergence, "Jacobi iteration exceeded the sweep cap");
                }
                ++rotations;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, tau) / (std::abs(tau) + std::hypot(1.0, tau));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double wkp = w(k, p);
                    const double wkq = w(k, q);
                    w(k, p) = c * wkp - s * wkq;
                    w(k, q) = s * wkp + c * wkq;
                }
            }
        }
        if (rotations == 0) {
            break;
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

    SpectralDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues(k) = a(src, src);
        out.eigenvectors.row(k) = w.col(src).transpose();
    }
    out.sweeps = sweep;
    return out;
}

/// Vᵀ·diag(f(λ))·V.
template <class Function>
Eigen::MatrixXd apply_matrix_function(const SpectralDecomposition& d, Function&& f)
{
    Eigen::VectorXd values(d.size());
    for (Eigen::Index j = 0; j < d.size(); ++j) {
        values(j) = static_cast<double>(f(d.eigenvalues(j)));
    }
    return d.eigenvectors.transpose() * values.asDiagonal() * d.eigenvectors;
}

inline Eigen::MatrixXd reconstruct(const SpectralDecomposition& d)
{
    return apply_matrix_function(d, [](double x) { return x; });
}

/// Symmetric inverse square root; fails unless λ_min > pd_tol·λ_max.
inline Eigen::MatrixXd inverse_sqrt(const SpectralDecomposition& d, double pd_tol)
{
    if (d.size() == 0) {
        return {};
    }
    const double lmin = d.eigenvalues(0);
    const double lmax = d.eigenvalues(d.size() - 1);
    if (!(lmax > 0.0) || !(lmin > pd_tol * lmax)) {
        throw Error(Errc::not_positive_definite, "minimum eigenvalue " + std::to_string(lmin) +
                                                     " is not above pd_tol * " + std::to_string(lmax));
    }
    return apply_matrix_function(d, [](double x) { return 1.0 / std::sqrt(x); });
}

} // namespace rmtlab
