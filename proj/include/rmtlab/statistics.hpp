#pragma once

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "rmtlab/contour.hpp"
#include "rmtlab/decomposition.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/functions.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/spectral.hpp"

namespace rmtlab {

/// Everything one replication needs: both covariance matrices, their spectra and v̄ = B·x̄.
struct SampleAnalysis {
    Dimensions dims;
    CovarianceSet cov;
    SpectralDecomposition centered;
    SpectralDecomposition uncentered;
    Eigen::VectorXd v;
    double norm_sq = 0.0;
};

inline SampleAnalysis analyze(const SampleBatch& batch, const ModelSpec& model)
{
    SampleAnalysis a;
    a.dims = model.dims;
    a.cov = covariance_set(batch, model);
    a.centered = eig_sym(a.cov.S_centered);
    a.uncentered = eig_sym(a.cov.S_uncentered);
    a.v = batch.Bxbar;
    a.norm_sq = a.v.squaredNorm();
    return a;
}

inline void require_nonzero_mean(const SampleAnalysis& a)
{
    if (!(a.norm_sq > tiny)) {
        throw Error(Errc::zero_mean_vector, "||B xbar||^2 underflows; degenerate draw");
    }
}

struct CLTStatistics {
    double X_n = 0.0;
    double Y_n = 0.0;
    double ratio = 0.0;   // v̄ᵀ f(𝕊̃) v̄ / ‖v̄‖²
    double norm_sq = 0.0; // ‖v̄‖²
    /// (n/√p)(v̄ᵀ f(𝕊̃) v̄ − c_n f(1)): the unnormalized quadratic form, reported alongside X_n.
    double X_n_mean_scaled = 0.0;
};

inline CLTStatistics compute_XY(const SampleAnalysis& a, const TestFunctionPair& fg)
{
    require_nonzero_mean(a);
    const double n = a.dims.n;
    const double sqrt_p = std::sqrt(static_cast<double>(a.dims.p));
    const double c_n = a.dims.c_n;

    const Eigen::MatrixXd f_of_s = apply_matrix_function(a.centered, [&](double x) { return fg.f(x); });
    const double qform = a.v.dot(f_of_s * a.v);

    // ratio − f(1) = Σ t_j²(f(λ_j) − f(1)) / Σ t_j², free of cancellation (exactly 0 for constant f)
    const Eigen::VectorXd t = a.centered.eigenvectors * a.v;
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) {
        const double w = t(j) * t(j);
        num += w * (fg.f(a.centered.eigenvalues(j)) - fg.f_at_1);
        den += w;
    }

    CLTStatistics s;
    s.norm_sq = a.norm_sq;
    s.ratio = qform / a.norm_sq;
    s.X_n = (n / sqrt_p) * c_n * (num / den);
    s.Y_n = (n / sqrt_p) * (fg.g(a.norm_sq) - fg.g(c_n));
    s.X_n_mean_scaled = (n / sqrt_p) * (qform - c_n * fg.f_at_1);
    return s;
}

inline CLTStatistics compute_XY(const SampleBatch& batch, const ModelSpec& model, const TestFunctionPair& fg)
{
    return compute_XY(analyze(batch, model), fg);
}

struct LimitCovariance {
    Eigen::Matrix2d gamma1;
    std::string description;
};

/// Γ₁ = [[2f(1)², 2g′(0)f(1)], [2g′(0)f(1), 2g′(0)²]].
inline LimitCovariance gamma1(double f_at_1, double g_prime_at_0)
{
    if (f_at_1 == 0.0 || g_prime_at_0 == 0.0) {
        throw Error(Errc::invalid_hypothesis, "Gamma_1 needs f(1) != 0 and g'(0) != 0");
    }
    LimitCovariance out;
    out.gamma1 << 2.0 * f_at_1 * f_at_1, 2.0 * g_prime_at_0 * f_at_1, 2.0 * g_prime_at_0 * f_at_1,
        2.0 * g_prime_at_0 * g_prime_at_0;
    out.description = "f(1)=" + std::to_string(f_at_1) + ", g'(0)=" + std::to_string(g_prime_at_0);
    return out;
}

/// Second moments of the limit field (X(z₁), X(z₂), Y), without conjugation:
/// [[E X(z₁)X(z₂), E X(z₁)Y], [E X(z₂)Y, E Y²]].
inline Eigen::Matrix2cd limit_kernel(cplx z1, cplx z2, double g_prime_at_0)
{
    const cplx m1 = limit_stieltjes(z1);
    const cplx m2 = limit_stieltjes(z2);
    Eigen::Matrix2cd k;
    k << 2.0 * m1 * m2, 2.0 * g_prime_at_0 * m1, 2.0 * g_prime_at_0 * m2, cplx(2.0 * g_prime_at_0 * g_prime_at_0, 0.0);
    return k;
}

inline constexpr double path_disagreement_tol = 1e-6;

/// X_n(z) together with its diagnostics.
struct ProcessPoint {
    cplx X_n;             // √p (v̄ᵀ(𝕊̃ − zI)⁻¹v̄ / ‖v̄‖² − m(z))
    cplx M_n;             // (n/√p)(v̄ᵀ(𝕊̃ − zI)⁻¹v̄ − c_n m(z))
    cplx qform_uncentered; // v̄ᵀ(S̃ − zI)⁻¹v̄
    double path_gap = 0.0; // |X_n via centered − X_n via the rank-one identity|
};

inline ProcessPoint process_point(const SampleAnalysis& a, cplx z)
{
    require_nonzero_mean(a);
    const double sqrt_p = std::sqrt(static_cast<double>(a.dims.p));
    const double scale = a.dims.n / sqrt_p;
    const cplx m = limit_stieltjes(z);

    const cplx q_c = resolvent_qform(a.centered, a.v, z);
    const cplx q_u = resolvent_qform(a.uncentered, a.v, z);
    const cplx q_c_via_u = rank_one_downdate(q_u);

    ProcessPoint out;
    out.X_n = scale * a.dims.c_n * (q_c / a.norm_sq - m);
    out.M_n = scale * (q_c - a.dims.c_n * m);
    out.qform_uncentered = q_u;
    out.path_gap = sqrt_p * std::abs(q_c - q_c_via_u) / a.norm_sq;
    if (out.path_gap > path_disagreement_tol * std::max(1.0, std::abs(out.X_n))) {
        throw Error(Errc::path_disagreement, "centered and rank-one paths differ by " + std::to_string(out.path_gap));
    }
    return out;
}

inline cplx process_Xn(const SampleAnalysis& a, cplx z)
{
    return process_point(a, z).X_n;
}

inline cplx process_Xn(const SampleBatch& batch, const ModelSpec& model, cplx z)
{
    return process_Xn(analyze(batch, model), z);
}

/// ρ_n = n^{−ϑ}.
inline double rho_n(int n, double vartheta)
{
    return std::pow(static_cast<double>(n), -vartheta);
}

/// X̂_n(z) on C: X_n(z) away from the real axis, linear interpolation across
/// |Im z| ≤ ρ_n/n on the two vertical sides.
template <class Evaluator>
cplx truncated_process(Evaluator&& xn, cplx z, int n, double vartheta, const ContourSpec& contour)
{
    if (!contour.on_contour(z)) {
        throw Error(Errc::off_contour, "z is not on the rectangular contour");
    }
    const double rho = rho_n(n, vartheta);
    const double gap = rho / n;
    const double tol = 1e-12 * (1.0 + std::abs(z));
    double u = 0.0;
    bool vertical = false;
    if (std::abs(z.real() - contour.u_r) <= tol) {
        u = contour.u_r;
        vertical = true;
    } else if (std::abs(z.real() - contour.u_l) <= tol) {
        u = contour.u_l;
        vertical = true;
    }
    const double v = z.imag();
    if (!vertical || std::abs(v) > gap) {
        return xn(z);
    }
    const double w1 = (n * v + rho) / (2.0 * rho);
    const double w2 = (rho - n * v) / (2.0 * rho);
    const cplx upper(u, gap);
    const cplx lower(u, -gap);
    if (w2 == 0.0) return xn(upper);
    if (w1 == 0.0) return xn(lower);
    return w1 * xn(upper) + w2 * xn(lower);
}

} // namespace rmtlab
