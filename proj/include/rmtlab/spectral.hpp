#pragma once

#include <complex>

#include <Eigen/Dense>

#include "rmtlab/decomposition.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/model.hpp"

namespace rmtlab {

using cplx = std::complex<double>;

inline constexpr double pole_tol = 1e-14;
inline constexpr double tiny = 1e-300;

/// Centered and uncentered sample covariance in whitened coordinates.
struct CovarianceSet {
    Eigen::MatrixXd S_centered;
    Eigen::MatrixXd S_uncentered;
    double relation_residual = 0.0;
};

inline CovarianceSet covariance_set(const SampleBatch& batch, const ModelSpec& model)
{
    const double n = static_cast<double>(model.dims.n);
    CovarianceSet out;
    out.S_uncentered.noalias() = batch.Bx * batch.Bx.transpose();
    out.S_uncentered /= n;
    const Eigen::MatrixXd centered = batch.Bx.colwise() - batch.Bxbar;
    out.S_centered.noalias() = centered * centered.transpose();
    out.S_centered /= n;
    // exact symmetry, the products above are symmetric only up to rounding
    out.S_uncentered = 0.5 * (out.S_uncentered + out.S_uncentered.transpose()).eval();
    out.S_centered = 0.5 * (out.S_centered + out.S_centered.transpose()).eval();
    const Eigen::MatrixXd rank_one = batch.Bxbar * batch.Bxbar.transpose();
    out.relation_residual = (out.S_centered - (out.S_uncentered - rank_one)).cwiseAbs().maxCoeff();
    return out;
}

/// Spectral distribution with mass weights_j at lambdas_j.
struct WeightedESD {
    Eigen::VectorXd lambdas;
    Eigen::VectorXd weights;
    double total_mass = 0.0;

    double mass_outside(double lo, double hi) const
    {
        double out = 0.0;
        for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
            if (lambdas(j) < lo || lambdas(j) > hi) out += weights(j);
        }
        return out;
    }
};

/// Weights t_j² with t = V·v/‖v‖.
inline WeightedESD weighted_esd(const SpectralDecomposition& d, const Eigen::VectorXd& v)
{
    const double norm = v.norm();
    if (!(norm > tiny)) {
        throw Error(Errc::zero_vector, "weighted ESD needs a nonzero direction");
    }
    const Eigen::VectorXd t = d.eigenvectors * (v / norm);
    WeightedESD esd;
    esd.lambdas = d.eigenvalues;
    esd.weights = t.array().square();
    esd.total_mass = esd.weights.sum();
    return esd;
}

inline void check_pole(double lambda, cplx z)
{
    if (std::abs(cplx(lambda, 0.0) - z) <= pole_tol) {
        throw Error(Errc::pole_hit, "z coincides with eigenvalue " + std::to_string(lambda));
    }
}

/// m(z) = Σ_j w_j / (λ_j − z).
inline cplx stieltjes(const WeightedESD& esd, cplx z)
{
    cplx sum{0.0, 0.0};
    for (Eigen::Index j = 0; j < esd.lambdas.size(); ++j) {
        check_pole(esd.lambdas(j), z);
        sum += esd.weights(j) / (esd.lambdas(j) - z);
    }
    return sum;
}

/// Stieltjes transform of the limiting law H = δ₁: m(z) = 1/(1 − z).
inline cplx limit_stieltjes(cplx z)
{
    if (std::abs(1.0 - z) <= pole_tol) {
        throw Error(Errc::pole_hit, "m(z) has a pole at z = 1");
    }
    return 1.0 / (1.0 - z);
}

/// wᵀ(S − zI)⁻¹w = Σ_j (V·w)_j² / (λ_j − z), reusing a decomposition of S.
inline cplx resolvent_qform(const SpectralDecomposition& d, const Eigen::VectorXd& w, cplx z)
{
    const Eigen::VectorXd y = d.eigenvectors * w;
    cplx sum{0.0, 0.0};
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        check_pole(d.eigenvalues(j), z);
        sum += (y(j) * y(j)) / (d.eigenvalues(j) - z);
    }
    return sum;
}

inline cplx resolvent_qform(const Eigen::MatrixXd& S, const Eigen::VectorXd& w, cplx z)
{
    return resolvent_qform(eig_sym(S), w, z);
}

/// Returns q_u/(1 − q_u) given q_u = rᵀ(S + rrᵀ − zI)⁻¹r, i.e. rᵀ(S − zI)⁻¹r by the rank-one update.
inline cplx rank_one_downdate(cplx q_uncentered)
{
    const cplx denom = 1.0 - q_uncentered;
    if (std::abs(denom) <= pole_tol) {
        throw Error(Errc::pole_hit, "1 - q_u vanishes in the rank-one identity");
    }
    return q_uncentered / denom;
}

inline double rank_one_identity_residual(const SpectralDecomposition& centered, const SpectralDecomposition& uncentered,
                                         const Eigen::VectorXd& v, cplx z)
{
    const cplx q_u = resolvent_qform(uncentered, v, z);
    const cplx q_c = resolvent_qform(centered, v, z);
    return std::abs(rank_one_downdate(q_u) - q_c);
}

inline double rank_one_identity_residual(const SampleBatch& batch, const ModelSpec& model, cplx z)
{
    const CovarianceSet cov = covariance_set(batch, model);
    return rank_one_identity_residual(eig_sym(cov.S_centered), eig_sym(cov.S_uncentered), batch.Bxbar, z);
}

} // namespace rmtlab
