#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "rmtlab/decomposition.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/random.hpp"

namespace rmtlab {

/// Reduced dimension p, observed dimension q, latent dimension m and sample size n.
struct Dimensions {
    int p = 0;
    int q = 0;
    int m = 0;
    int n = 0;
    double c_n = 0.0;
};

inline Dimensions make_dimensions(int p, int q, int m, int n)
{
    if (p < 1 || q < 1 || m < 1 || n < 1) {
        throw Error(Errc::invalid_argument, "dimensions must be positive");
    }
    if (!(p <= q && q <= m)) {
        throw Error(Errc::invalid_argument, "dimensions must satisfy p <= q <= m");
    }
    if (p >= n) {
        throw Error(Errc::regime_violation, "p = " + std::to_string(p) + " must be below n = " + std::to_string(n));
    }
    return Dimensions{p, q, m, n, static_cast<double>(p) / static_cast<double>(n)};
}

/// p = max(1, floor(scale·n^beta)), q = q_factor·p, m = m_factor·q.
inline Dimensions dims_from_regime(int n, double beta, double scale, int q_factor = 2, int m_factor = 2)
{
    if (n < 4) {
        throw Error(Errc::invalid_argument, "n must be at least 4");
    }
    if (!(beta > 0.0 && beta < 1.0) || !(scale > 0.0)) {
        throw Error(Errc::invalid_argument, "beta must lie in (0,1) and scale must be positive");
    }
    if (q_factor < 1 || m_factor < 1) {
        throw Error(Errc::invalid_argument, "q_factor and m_factor must be at least 1");
    }
    // relative nudge so that exact powers such as 256^0.5 do not floor to 15
    const double raw = scale * std::pow(static_cast<double>(n), beta) * (1.0 + 1e-12);
    const double p_real = std::max(1.0, std::floor(raw));
    if (p_real >= n) {
        throw Error(Errc::regime_violation, "p = " + std::to_string(p_real) + " is not below n");
    }
    const int p = static_cast<int>(p_real);
    return make_dimensions(p, q_factor * p, m_factor * q_factor * p, n);
}

enum class DistributionKind { gaussian, rademacher, uniform_unit_var, centered_exponential };

/// Standardized (mean 0, variance 1) entry law.
struct EntryDistribution {
    DistributionKind kind = DistributionKind::gaussian;

    double fourth_moment() const noexcept
    {
        switch (kind) {
        case DistributionKind::gaussian: return 3.0;
        case DistributionKind::rademacher: return 1.0;
        case DistributionKind::uniform_unit_var: return 9.0 / 5.0;
        case DistributionKind::centered_exponential: return 9.0;
        }
        return 0.0;
    }

    double draw(RandomStream& rng) const
    {
        switch (kind) {
        case DistributionKind::gaussian: return rng.normal();
        case DistributionKind::rademacher: return rng.rademacher();
        case DistributionKind::uniform_unit_var: return rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
        case DistributionKind::centered_exponential: return rng.exponential() - 1.0;
        }
        return 0.0;
    }
};

inline std::string_view to_string(DistributionKind kind) noexcept
{
    switch (kind) {
    case DistributionKind::gaussian: return "gaussian";
    case DistributionKind::rademacher: return "rademacher";
    case DistributionKind::uniform_unit_var: return "uniform_unit_var";
    case DistributionKind::centered_exponential: return "centered_exponential";
    }
    return "unknown";
}

inline EntryDistribution parse_distribution(std::string_view name)
{
    if (name == "gaussian" || name == "normal") return {DistributionKind::gaussian};
    if (name == "rademacher") return {DistributionKind::rademacher};
    if (name == "uniform_unit_var" || name == "uniform") return {DistributionKind::uniform_unit_var};
    if (name == "centered_exponential" || name == "exponential") return {DistributionKind::centered_exponential};
    throw Error(Errc::config_error, "unknown entry distribution '" + std::string(name) + "'");
}

enum class GammaKind { identity_padded, gaussian_random };
enum class UKind { coordinate_selection, random_semi_orthogonal };

inline GammaKind parse_gamma_kind(std::string_view name)
{
    if (name == "identity_padded") return GammaKind::identity_padded;
    if (name == "gaussian_random") return GammaKind::gaussian_random;
    throw Error(Errc::config_error, "unknown gamma_kind '" + std::string(name) + "'");
}

inline UKind parse_u_kind(std::string_view name)
{
    if (name == "coordinate_selection") return UKind::coordinate_selection;
    if (name == "random_semi_orthogonal") return UKind::random_semi_orthogonal;
    throw Error(Errc::config_error, "unknown u_kind '" + std::string(name) + "'");
}

inline std::string_view to_string(GammaKind k) noexcept
{
    return k == GammaKind::identity_padded ? "identity_padded" : "gaussian_random";
}

inline std::string_view to_string(UKind k) noexcept
{
    return k == UKind::coordinate_selection ? "coordinate_selection" : "random_semi_orthogonal";
}

inline constexpr double pd_tol = 1e-10;

/// Population objects. Immutable once built.
struct ModelSpec {
    Dimensions dims;
    Eigen::VectorXd mu;               // q
    Eigen::MatrixXd Gamma;            // q × m
    Eigen::MatrixXd U;                // p × q
    Eigen::MatrixXd Sigma_p;          // p × p
    Eigen::MatrixXd Sigma_p_inv_sqrt; // p × p
    Eigen::MatrixXd B;                // p × m, B·Bᵀ = I_p
    Eigen::VectorXd mu_tilde;         // p
};

/// Assemble a model from explicit Γ, U and μ and verify the whitening invariants.
inline ModelSpec make_model(const Dimensions& dims, Eigen::MatrixXd gamma, Eigen::MatrixXd u, Eigen::VectorXd mu)
{
    if (gamma.rows() != dims.q || gamma.cols() != dims.m || u.rows() != dims.p || u.cols() != dims.q ||
        mu.size() != dims.q) {
        throw Error(Errc::invalid_argument, "model matrices do not match the dimensions");
    }
    ModelSpec model;
    model.dims = dims;
    model.mu = std::move(mu);
    model.Gamma = std::move(gamma);
    model.U = std::move(u);

    const Eigen::MatrixXd ug = model.U * model.Gamma;
    model.Sigma_p = ug * ug.transpose();
    model.Sigma_p = 0.5 * (model.Sigma_p + model.Sigma_p.transpose()).eval();

    SpectralDecomposition sigma_eig;
    try {
        sigma_eig = eig_sym(model.Sigma_p);
    } catch (const Error& e) {
        throw Error(Errc::decomposition_failure, e.what());
    }
    model.Sigma_p_inv_sqrt = inverse_sqrt(sigma_eig, pd_tol);
    model.B = model.Sigma_p_inv_sqrt * ug;
    model.mu_tilde = model.Sigma_p_inv_sqrt * (model.U * model.mu);

    const Eigen::MatrixXd gram = model.B * model.B.transpose();
    const double whitening_err = (gram - Eigen::MatrixXd::Identity(dims.p, dims.p)).cwiseAbs().maxCoeff();
    if (whitening_err > 1e-10) {
        throw Error(Errc::decomposition_failure, "B·Bᵀ deviates from I_p by " + std::to_string(whitening_err));
    }
    return model;
}

inline Eigen::MatrixXd padded_identity(int rows, int cols)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    for (int i = 0; i < std::min(rows, cols); ++i) {
        out(i, i) = 1.0;
    }
    return out;
}

inline ModelSpec build_model(const Dimensions& dims, GammaKind gamma_kind, UKind u_kind, Eigen::VectorXd mu,
                             RandomStream& rng)
{
    Eigen::MatrixXd gamma;
    if (gamma_kind == GammaKind::identity_padded) {
        gamma = padded_identity(dims.q, dims.m);
    } else {
        gamma.resize(dims.q, dims.m);
        for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
            for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
                gamma(i, j) = rng.normal();
            }
        }
    }

    Eigen::MatrixXd u;
    if (u_kind == UKind::coordinate_selection) {
        u = padded_identity(dims.p, dims.q);
    } else {
        Eigen::MatrixXd g(dims.q, dims.p);
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                g(i, j) = rng.normal();
            }
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dims.q, dims.p);
        u = q.transpose();
    }
    return make_model(dims, std::move(gamma), std::move(u), std::move(mu));
}

/// One draw of the raw entries together with the derived whitened quantities.
struct SampleBatch {
    Eigen::MatrixXd X;           // m × n raw entries
    Eigen::VectorXd xbar;        // m
    Eigen::MatrixXd Bx;          // p × n, columns B·x_j
    Eigen::VectorXd Bxbar;       // p
    Eigen::MatrixXd z_tilde;     // p × n, μ̃ + B·x_j
    Eigen::VectorXd z_tilde_bar; // p
};

inline SampleBatch make_batch(const ModelSpec& model, Eigen::MatrixXd X)
{
    if (X.rows() != model.dims.m || X.cols() != model.dims.n) {
        throw Error(Errc::invalid_argument, "entry matrix does not match the model dimensions");
    }
    SampleBatch batch;
    batch.X = std::move(X);
    batch.xbar = batch.X.rowwise().mean();
    batch.Bx.noalias() = model.B * batch.X;
    batch.Bxbar = model.B * batch.xbar;
    batch.z_tilde = batch.Bx.colwise() + model.mu_tilde;
    batch.z_tilde_bar = batch.z_tilde.rowwise().mean();
    return batch;
}

inline Eigen::MatrixXd draw_entries(int rows, int cols, const EntryDistribution& dist, RandomStream& rng)
{
    Eigen::MatrixXd X(rows, cols);
    double* data = X.data();
    const Eigen::Index total = X.size();
    switch (dist.kind) {
    case DistributionKind::gaussian:
        for (Eigen::Index k = 0; k < total; ++k) data[k] = rng.normal();
        break;
    default:
        for (Eigen::Index k = 0; k < total; ++k) data[k] = dist.draw(rng);
        break;
    }
    return X;
}

inline SampleBatch sample_batch(const ModelSpec& model, const EntryDistribution& dist, RandomStream& rng)
{
    return make_batch(model, draw_entries(model.dims.m, model.dims.n, dist, rng));
}

} // namespace rmtlab
