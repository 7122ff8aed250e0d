#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "rmtlab/contour.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/functions.hpp"
#include "rmtlab/spectral.hpp"
#include "rmtlab/statistics.hpp"

namespace rmtlab {

struct CauchyCheck {
    double lhs = 0.0; // √p (Σ t_j² f(λ_j) − f(1))
    cplx rhs;         // −(1/2πi) ∮ f(z) X_n(z) dz
    double gap = 0.0;
};

inline void require_spectrum_inside(const SpectralDecomposition& d, const ContourSpec& contour)
{
    if (!contour.encloses(1.0)) {
        throw Error(Errc::spectrum_outside_contour, "the contour must enclose 1");
    }
    if (d.size() == 0) return;
    const double lo = d.eigenvalues(0);
    const double hi = d.eigenvalues(d.size() - 1);
    if (!contour.encloses(lo) || !contour.encloses(hi)) {
        throw Error(Errc::spectrum_outside_contour, "spectrum [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                                        "] is not inside (" + std::to_string(contour.u_l) + ", " +
                                                        std::to_string(contour.u_r) + ")");
    }
}

inline CauchyCheck cauchy_functional(const SampleAnalysis& a, const TestFunction& f, const ContourSpec& contour)
{
    require_nonzero_mean(a);
    require_spectrum_inside(a.centered, contour);

    const WeightedESD esd = weighted_esd(a.centered, a.v);
    double integral = 0.0;
    for (Eigen::Index j = 0; j < esd.lambdas.size(); ++j) {
        integral += esd.weights(j) * f(esd.lambdas(j));
    }
    CauchyCheck out;
    out.lhs = std::sqrt(static_cast<double>(a.dims.p)) * (integral - f(1.0));

    const cplx contour_integral = contour.integrate([&](cplx z) { return f(z) * process_Xn(a, z); });
    out.rhs = -contour_integral / (2.0 * std::numbers::pi * cplx(0.0, 1.0));
    out.gap = std::abs(cplx(out.lhs, 0.0) - out.rhs);
    return out;
}

inline CauchyCheck cauchy_functional(const SampleBatch& batch, const ModelSpec& model, const TestFunction& f,
                                     const ContourSpec& contour)
{
    return cauchy_functional(analyze(batch, model), f, contour);
}

struct LimitVarianceIntegrals {
    double var_X = 0.0;
    double cov_XY = 0.0;
    double var_Y = 0.0;
    double var_X_imag = 0.0;
    double cov_XY_imag = 0.0;
};

/// Var X = −(1/4π²) ∮∮ 2 f(z₁)f(z₂)/((z₁−1)(z₂−1)) dz₁dz₂, Cov(X, Y) = (1/πi) ∮ g′(0) f(z)/(z−1) dz.
/// The double integral factorizes into the square of a single contour integral.
inline LimitVarianceIntegrals limit_variance_integrals(const TestFunction& f, double g_prime_at_0,
                                                       const ContourSpec& contour)
{
    const cplx single = contour.integrate([&](cplx z) { return f(z) / (z - 1.0); });
    const double pi = std::numbers::pi;
    const cplx i(0.0, 1.0);
    const cplx var_x = -(1.0 / (4.0 * pi * pi)) * 2.0 * single * single;
    const cplx cov = (1.0 / (pi * i)) * g_prime_at_0 * single;

    LimitVarianceIntegrals out;
    out.var_X = var_x.real();
    out.var_X_imag = var_x.imag();
    out.cov_XY = cov.real();
    out.cov_XY_imag = cov.imag();
    out.var_Y = 2.0 * g_prime_at_0 * g_prime_at_0;
    return out;
}

} // namespace rmtlab
