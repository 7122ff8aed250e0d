#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmtlab/contour.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/functions.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/parallel.hpp"
#include "rmtlab/random.hpp"
#include "rmtlab/spectral.hpp"
#include "rmtlab/statistics.hpp"
#include "rmtlab/truncate.hpp"

namespace rmtlab {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class MuMode { zero, constant };

/// Replaces random entries in tests: `zero` forces X = 0, `identity_design` sets
/// x_j = √m·e_{j mod m} so that (1/n)·X·Xᵀ = I_m when m divides n.
enum class EntryHook { none, zero, identity_design };

struct ModelConfig {
    int n = 64;
    double beta = 0.4;
    double scale = 1.0;
    std::optional<int> p;
    int q_factor = 2;
    int m_factor = 2;
    GammaKind gamma_kind = GammaKind::gaussian_random;
    UKind u_kind = UKind::random_semi_orthogonal;
    EntryDistribution dist;
    MuMode mu_mode = MuMode::zero;
    double mu_value = 0.0;
    std::uint64_t seed = 1;
};

inline constexpr std::uint64_t model_stream_index = std::numeric_limits<std::uint64_t>::max();

inline Dimensions dimensions(const ModelConfig& cfg)
{
    if (cfg.p) {
        const int p = *cfg.p;
        if (p < 1) throw Error(Errc::invalid_argument, "p must be positive");
        if (cfg.q_factor < 1 || cfg.m_factor < 1) throw Error(Errc::invalid_argument, "factors must be >= 1");
        return make_dimensions(p, cfg.q_factor * p, cfg.m_factor * cfg.q_factor * p, cfg.n);
    }
    return dims_from_regime(cfg.n, cfg.beta, cfg.scale, cfg.q_factor, cfg.m_factor);
}

inline ModelSpec build_model(const ModelConfig& cfg)
{
    const Dimensions dims = dimensions(cfg);
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(dims.q, cfg.mu_mode == MuMode::constant ? cfg.mu_value : 0.0);
    RandomStream rng(mix_seed(cfg.seed, model_stream_index));
    return build_model(dims, cfg.gamma_kind, cfg.u_kind, std::move(mu), rng);
}

struct ContourConfig {
    double delta = 0.5;
    double v0 = 1.0;
    int nq = 64;
    double vartheta = 0.5;
};

struct ExperimentConfig {
    ModelConfig model;
    std::string f = "poly:[0,1]";
    std::string g = "identity";
    int reps = 200;
    std::vector<cplx> z_points;
    ContourConfig contour;
    TruncationMode truncation = TruncationMode::off;
    bool resample_degenerate = true;
    int threads = 0;
    EntryHook hook = EntryHook::none;
};

inline bool on_real_segment(cplx z, double u_l, double u_r) noexcept
{
    return z.imag() == 0.0 && z.real() >= u_l && z.real() <= u_r;
}

inline void validate(const ExperimentConfig& cfg)
{
    if (cfg.reps < 2) {
        throw Error(Errc::config_error, "reps must be at least 2");
    }
    const double u_l = 1.0 - cfg.contour.delta;
    const double u_r = 1.0 + cfg.contour.delta;
    for (const cplx& z : cfg.z_points) {
        if (on_real_segment(z, u_l, u_r)) {
            throw Error(Errc::config_error, "z point on the real segment [u_l, u_r] is not allowed");
        }
    }
    (void)make_function_pair(parse_test_function(cfg.f), parse_outer_function(cfg.g));
}

// ---------------------------------------------------------------------------
// Records and reports
// ---------------------------------------------------------------------------

struct ReplicationRecord {
    int rep = 0;
    double X_n = 0.0;
    double Y_n = 0.0;
    double norm_sq = 0.0;
    double lambda_min = 0.0; // of the uncentered S̃_n
    double lambda_max = 0.0;
    double ratio = 0.0;
    double X_n_mean_scaled = 0.0;
    std::vector<cplx> Xz;      // X̂_n(z) per z point
    std::vector<cplx> Mz;      // mean-scaled process per z point
    std::vector<cplx> qform_u; // v̄ᵀ(S̃ − zI)⁻¹v̄ per z point
    double f2_mass_outside = 0.0;
    double fraction_truncated = 0.0;
    double sigma_n = 1.0;
    double max_path_gap = 0.0;
    int resamples = 0;
};

struct DirectionDiagnostics {
    std::array<double, 2> direction{};
    double target_variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks_statistic = 0.0;
    double ks_pvalue = 0.0;
    bool singular = false;
};

struct NormalityRecord {
    std::array<DirectionDiagnostics, 3> directions;
};

struct ConcentrationQuantiles {
    double q50 = 0.0;
    double q95 = 0.0;
    double q99 = 0.0;
    double q100 = 0.0;
};

struct PointMoments {
    cplx z;
    cplx target_xx;       // E X(z)²
    cplx target_xy;       // E X(z)Y
    cplx empirical_xx;    // mean of X̂_n(z)²
    cplx empirical_xy;    // mean of X̂_n(z)·Y_n
    cplx mean_scaled_xx;  // same for the mean-scaled process
    cplx mean_scaled_xy;
};

struct MonteCarloReport {
    ExperimentConfig config;
    Dimensions dims;
    std::vector<ReplicationRecord> per_rep;
    Eigen::Vector2d empirical_mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d empirical_cov = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d mean_scaled_cov = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d gamma1_target = Eigen::Matrix2d::Zero();
    std::vector<PointMoments> kernel;
    std::optional<NormalityRecord> normality;
    std::optional<NormalityRecord> mean_scaled_normality;
    ConcentrationQuantiles concentration;
    double f2_mass_outside_mean = 0.0;
    double fraction_truncated_mean = 0.0;
    int resample_count = 0;
    double wall_time_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Elementary estimators
// ---------------------------------------------------------------------------

/// Unbiased sample covariance (divisor R − 1).
inline Eigen::MatrixXd empirical_covariance(const std::vector<Eigen::VectorXd>& samples)
{
    if (samples.size() < 2) {
        throw Error(Errc::insufficient_samples, "empirical covariance needs at least two samples");
    }
    const Eigen::Index d = samples.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& s : samples) {
        const Eigen::VectorXd c = s - mean;
        cov.noalias() += c * c.transpose();
    }
    return cov / static_cast<double>(samples.size() - 1);
}

inline double normal_cdf(double x) noexcept
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// P(K > λ) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) noexcept
{
    if (lambda <= 0.0) return 1.0;
    const double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // P(K ≤ λ) = √(2π)/λ Σ_k exp(−(2k−1)²π²/(8λ²))
        double cdf = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double a = (2.0 * k - 1.0) * pi;
            cdf += std::exp(-a * a / (8.0 * lambda * lambda));
        }
        cdf *= std::sqrt(2.0 * pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample Kolmogorov–Smirnov statistic against N(0, variance).
inline double ks_statistic_normal(std::vector<double> values, double variance)
{
    std::sort(values.begin(), values.end());
    const double sd = std::sqrt(variance);
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double F = normal_cdf(values[i] / sd);
        d = std::max({d, (i + 1) / n - F, F - i / n});
    }
    return d;
}

inline DirectionDiagnostics direction_diagnostics(const std::vector<Eigen::Vector2d>& samples,
                                                  const std::array<double, 2>& a, const Eigen::Matrix2d& target_cov)
{
    const Eigen::Vector2d dir(a[0], a[1]);
    DirectionDiagnostics out;
    out.direction = a;
    out.target_variance = dir.dot(target_cov * dir);
    if (!(out.target_variance > 1e-12)) {
        throw Error(Errc::singular_direction, "target variance vanishes along a Cramer-Wold direction");
    }
    std::vector<double> proj;
    proj.reserve(samples.size());
    for (const auto& s : samples) proj.push_back(dir.dot(s));
    const double n = static_cast<double>(proj.size());
    double mean = 0.0;
    for (double x : proj) mean += x;
    mean /= n;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double x : proj) {
        const double c = x - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    out.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    out.ks_statistic = ks_statistic_normal(std::move(proj), out.target_variance);
    out.ks_pvalue = kolmogorov_survival(std::sqrt(n) * out.ks_statistic);
    return out;
}

inline constexpr std::array<std::array<double, 2>, 3> cramer_wold_directions{
    {{1.0, 0.0}, {0.0, 1.0}, {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0}}};

/// Skewness, excess kurtosis and KS fit against N(0, aᵀΓa) along (1,0), (0,1), (1,1)/√2.
inline NormalityRecord normality_diagnostics(const std::vector<Eigen::Vector2d>& samples,
                                             const Eigen::Matrix2d& target_cov)
{
    if (samples.size() < 50) {
        throw Error(Errc::insufficient_samples, "normality diagnostics need at least 50 samples");
    }
    NormalityRecord rec;
    for (std::size_t k = 0; k < cramer_wold_directions.size(); ++k) {
        rec.directions[k] = direction_diagnostics(samples, cramer_wold_directions[k], target_cov);
    }
    return rec;
}

/// Same as normality_diagnostics but singular directions are flagged instead of thrown.
inline NormalityRecord normality_diagnostics_lenient(const std::vector<Eigen::Vector2d>& samples,
                                                     const Eigen::Matrix2d& target_cov)
{
    NormalityRecord rec;
    for (std::size_t k = 0; k < cramer_wold_directions.size(); ++k) {
        try {
            rec.directions[k] = direction_diagnostics(samples, cramer_wold_directions[k], target_cov);
        } catch (const Error& e) {
            if (e.code() != Errc::singular_direction) throw;
            rec.directions[k].direction = cramer_wold_directions[k];
            rec.directions[k].singular = true;
        }
    }
    return rec;
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// 50/95/99/100 percentiles of max(|λ_max − 1|, |λ_min − 1|).
inline ConcentrationQuantiles eigen_concentration_summary(const std::vector<ReplicationRecord>& records)
{
    std::vector<double> dev;
    dev.reserve(records.size());
    for (const auto& r : records) {
        dev.push_back(std::max(std::abs(r.lambda_max - 1.0), std::abs(r.lambda_min - 1.0)));
    }
    return {quantile(dev, 0.50), quantile(dev, 0.95), quantile(dev, 0.99), quantile(dev, 1.0)};
}

// ---------------------------------------------------------------------------
// Replications
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd hooked_entries(EntryHook hook, int m, int n)
{
    if (hook == EntryHook::zero) {
        return Eigen::MatrixXd::Zero(m, n);
    }
    if (n % m != 0) {
        throw Error(Errc::config_error, "identity_design hook needs m to divide n");
    }
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, n);
    for (int j = 0; j < n; ++j) X(j % m, j) = std::sqrt(static_cast<double>(m));
    return X;
}

/// Seed of attempt k of replication r: mix(master, r) for k = 0, mix(mix(master, r), k) after.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep, std::uint64_t attempt) noexcept
{
    const std::uint64_t base = mix_seed(master, rep);
    return attempt == 0 ? base : mix_seed(base, attempt);
}

struct ExperimentContext {
    ExperimentConfig config;
    ModelSpec model;
    TestFunctionPair fg;
    ContourSpec contour;
};

inline ExperimentContext make_context(const ExperimentConfig& config)
{
    validate(config);
    ExperimentContext ctx{config, build_model(config.model),
                          make_function_pair(parse_test_function(config.f), parse_outer_function(config.g)),
                          build_contour(config.contour.delta, config.contour.v0, config.contour.nq,
                                        config.contour.vartheta)};
    return ctx;
}

inline ReplicationRecord replicate(const ExperimentContext& ctx, int rep, std::atomic<long long>& draws)
{
    const ExperimentConfig& cfg = ctx.config;
    const ModelSpec& model = ctx.model;
    const long long draw_cap = 10LL * cfg.reps;

    for (std::uint64_t attempt = 0;; ++attempt) {
        if (draws.fetch_add(1) + 1 > draw_cap) {
            throw Error(Errc::too_many_degenerate, "resampling exceeded 10*R draws");
        }
        RandomStream rng(replication_seed(cfg.model.seed, static_cast<std::uint64_t>(rep), attempt));
        Eigen::MatrixXd X = cfg.hook == EntryHook::none
                                ? draw_entries(model.dims.m, model.dims.n, cfg.model.dist, rng)
                                : hooked_entries(cfg.hook, model.dims.m, model.dims.n);
        ReplicationRecord rec;
        rec.rep = rep;
        rec.resamples = static_cast<int>(attempt);
        if (cfg.truncation != TruncationMode::off) {
            auto [X_hat, report] = truncate_standardize(X, model, cfg.model.dist, cfg.truncation);
            X = std::move(X_hat);
            rec.fraction_truncated = report.fraction_truncated;
            rec.sigma_n = report.sigma_n;
        }
        const SampleBatch batch = make_batch(model, std::move(X));
        const SampleAnalysis a = analyze(batch, model);
        if (!(a.norm_sq > tiny)) {
            if (!cfg.resample_degenerate) {
                throw Error(Errc::zero_mean_vector, "degenerate draw in replication " + std::to_string(rep));
            }
            continue;
        }

        const CLTStatistics s = compute_XY(a, ctx.fg);
        rec.X_n = s.X_n;
        rec.Y_n = s.Y_n;
        rec.norm_sq = s.norm_sq;
        rec.ratio = s.ratio;
        rec.X_n_mean_scaled = s.X_n_mean_scaled;
        rec.lambda_min = a.uncentered.eigenvalues(0);
        rec.lambda_max = a.uncentered.eigenvalues(a.uncentered.size() - 1);
        rec.f2_mass_outside = weighted_esd(a.centered, a.v).mass_outside(0.7, 1.3);

        for (const cplx& z : cfg.z_points) {
            const ProcessPoint pt = process_point(a, z);
            rec.max_path_gap = std::max(rec.max_path_gap, pt.path_gap);
            rec.qform_u.push_back(pt.qform_uncentered);
            if (ctx.contour.on_contour(z)) {
                rec.Xz.push_back(truncated_process([&](cplx w) { return process_point(a, w).X_n; }, z,
                                                   model.dims.n, cfg.contour.vartheta, ctx.contour));
                rec.Mz.push_back(truncated_process([&](cplx w) { return process_point(a, w).M_n; }, z,
                                                   model.dims.n, cfg.contour.vartheta, ctx.contour));
            } else {
                rec.Xz.push_back(pt.X_n);
                rec.Mz.push_back(pt.M_n);
            }
        }
        return rec;
    }
}

inline MonteCarloReport run_clt_experiment(const ExperimentConfig& config)
{
    const auto start = std::chrono::steady_clock::now();
    const ExperimentContext ctx = make_context(config);

    MonteCarloReport report;
    report.config = config;
    report.dims = ctx.model.dims;
    report.per_rep.resize(static_cast<std::size_t>(config.reps));
    std::atomic<long long> draws{0};
    parallel_for(report.per_rep.size(), config.threads, [&](std::size_t r) {
        report.per_rep[r] = replicate(ctx, static_cast<int>(r), draws);
    });

    // aggregation in replication order
    const double R = static_cast<double>(config.reps);
    std::vector<Eigen::VectorXd> display;
    std::vector<Eigen::VectorXd> companion;
    std::vector<Eigen::Vector2d> display2;
    std::vector<Eigen::Vector2d> companion2;
    for (const auto& rec : report.per_rep) {
        display.push_back(Eigen::Vector2d(rec.X_n, rec.Y_n));
        companion.push_back(Eigen::Vector2d(rec.X_n_mean_scaled, rec.Y_n));
        display2.emplace_back(rec.X_n, rec.Y_n);
        companion2.emplace_back(rec.X_n_mean_scaled, rec.Y_n);
        report.empirical_mean += Eigen::Vector2d(rec.X_n, rec.Y_n);
        report.resample_count += rec.resamples;
        report.f2_mass_outside_mean += rec.f2_mass_outside;
        report.fraction_truncated_mean += rec.fraction_truncated;
    }
    report.empirical_mean /= R;
    report.f2_mass_outside_mean /= R;
    report.fraction_truncated_mean /= R;
    report.empirical_cov = empirical_covariance(display);
    report.mean_scaled_cov = empirical_covariance(companion);
    report.gamma1_target = gamma1(ctx.fg.f_at_1, ctx.fg.g_prime_at_0).gamma1;
    if (config.reps >= 50) {
        report.normality = normality_diagnostics_lenient(display2, report.gamma1_target);
        report.mean_scaled_normality = normality_diagnostics_lenient(companion2, report.gamma1_target);
    }
    report.concentration = eigen_concentration_summary(report.per_rep);

    for (std::size_t k = 0; k < config.z_points.size(); ++k) {
        PointMoments pm;
        pm.z = config.z_points[k];
        const Eigen::Matrix2cd target = limit_kernel(pm.z, pm.z, ctx.fg.g_prime_at_0);
        pm.target_xx = target(0, 0);
        pm.target_xy = target(0, 1);
        for (const auto& rec : report.per_rep) {
            pm.empirical_xx += rec.Xz[k] * rec.Xz[k];
            pm.empirical_xy += rec.Xz[k] * rec.Y_n;
            pm.mean_scaled_xx += rec.Mz[k] * rec.Mz[k];
            pm.mean_scaled_xy += rec.Mz[k] * rec.Y_n;
        }
        pm.empirical_xx /= R;
        pm.empirical_xy /= R;
        pm.mean_scaled_xx /= R;
        pm.mean_scaled_xy /= R;
        report.kernel.push_back(pm);
    }
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Process moments
// ---------------------------------------------------------------------------

struct PairMoment {
    std::size_t i = 0;
    std::size_t j = 0;
    cplx z1;
    cplx z2;
    cplx target;      // 2/((1−z₁)(1−z₂))
    cplx empirical;   // mean of X̂_n(z₁)·X̂_n(z₂)
    cplx mean_scaled; // same for the mean-scaled process
};

struct ProcessReport {
    MonteCarloReport base;
    std::vector<PairMoment> pairs;
};

/// Second moments E[X̂_n(z_i)X̂_n(z_j)] for all i ≤ j, and E[X̂_n(z)Y_n] via base.kernel.
inline ProcessReport process_moments(MonteCarloReport base)
{
    ProcessReport out;
    const auto& z = base.config.z_points;
    const double g1 = parse_outer_function(base.config.g).derivative_at_zero();
    const double R = static_cast<double>(base.per_rep.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        for (std::size_t j = i; j < z.size(); ++j) {
            PairMoment pm;
            pm.i = i;
            pm.j = j;
            pm.z1 = z[i];
            pm.z2 = z[j];
            pm.target = limit_kernel(z[i], z[j], g1)(0, 0);
            for (const auto& rec : base.per_rep) {
                pm.empirical += rec.Xz[i] * rec.Xz[j];
                pm.mean_scaled += rec.Mz[i] * rec.Mz[j];
            }
            pm.empirical /= R;
            pm.mean_scaled /= R;
            out.pairs.push_back(pm);
        }
    }
    out.base = std::move(base);
    return out;
}

inline ProcessReport run_process_experiment(const ExperimentConfig& config)
{
    if (config.z_points.empty()) {
        throw Error(Errc::config_error, "process experiment needs at least one z point");
    }
    return process_moments(run_clt_experiment(config));
}

// ---------------------------------------------------------------------------
// Resolvent mean
// ---------------------------------------------------------------------------

struct ResolventMeanCheck {
    cplx empirical_mean;
    cplx target;
    double scaled_gap = 0.0;
};

/// Ê[v̄ᵀ(S̃ − zI)⁻¹v̄] against c_n·m(z), scaled by n/√p.
inline ResolventMeanCheck resolvent_mean_check(const MonteCarloReport& report, std::size_t z_index)
{
    if (z_index >= report.config.z_points.size()) {
        throw Error(Errc::invalid_argument, "z index out of range");
    }
    const cplx z = report.config.z_points[z_index];
    ResolventMeanCheck out;
    for (const auto& rec : report.per_rep) out.empirical_mean += rec.qform_u[z_index];
    out.empirical_mean /= static_cast<double>(report.per_rep.size());
    out.target = report.dims.c_n * limit_stieltjes(z);
    out.scaled_gap = report.dims.n / std::sqrt(static_cast<double>(report.dims.p)) *
                     std::abs(out.empirical_mean - out.target);
    return out;
}

inline ResolventMeanCheck resolvent_mean_check(ExperimentConfig config, cplx z)
{
    config.z_points = {z};
    return resolvent_mean_check(run_clt_experiment(config), 0);
}

// ---------------------------------------------------------------------------
// Scaling exponents
// ---------------------------------------------------------------------------

enum class ScalingQuantity { mean_norm_dev, cross_qform, mean_qform };

inline ScalingQuantity parse_scaling_quantity(std::string_view name)
{
    if (name == "mean_norm_dev") return ScalingQuantity::mean_norm_dev;
    if (name == "cross_qform") return ScalingQuantity::cross_qform;
    if (name == "mean_qform") return ScalingQuantity::mean_qform;
    throw Error(Errc::config_error, "unknown scaling quantity '" + std::string(name) + "'");
}

inline std::string_view to_string(ScalingQuantity q) noexcept
{
    switch (q) {
    case ScalingQuantity::mean_norm_dev: return "mean_norm_dev";
    case ScalingQuantity::cross_qform: return "cross_qform";
    case ScalingQuantity::mean_qform: return "mean_qform";
    }
    return "unknown";
}

/// Theoretical log-log slope of the second moment when p = n^β.
inline double theoretical_slope(ScalingQuantity q, double beta) noexcept
{
    switch (q) {
    case ScalingQuantity::mean_norm_dev: return beta - 2.0;
    case ScalingQuantity::cross_qform: return beta - 1.0;
    case ScalingQuantity::mean_qform: return 2.0 * beta - 2.0;
    }
    return 0.0;
}

struct ScalingRow {
    int n = 0;
    int p = 0;
    // empirical second moments per quantity, indexed by ScalingQuantity
    std::array<double, 3> second_moment{};
    std::array<double, 3> std_error{};
};

struct ScalingResult {
    ScalingQuantity quantity = ScalingQuantity::mean_norm_dev;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double expected_slope = 0.0;
    std::vector<ScalingRow> values;
};

inline void validate_grid(const std::vector<int>& n_grid)
{
    std::vector<int> sorted = n_grid;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 4 || sorted.front() < 4 ||
        static_cast<double>(sorted.back()) < 8.0 * static_cast<double>(sorted.front())) {
        throw Error(Errc::grid_too_small, "n grid needs at least 4 distinct points spanning a factor of 8");
    }
}

/// E|(‖Bx̄‖² − c_n)|², E|x₁ᵀBᵀBx̄₁|² and E|x̄₁ᵀBᵀBx̄₁|² per grid point, x̄₁ = x̄ − x₁/n.
inline std::vector<ScalingRow> scaling_table(const std::vector<int>& n_grid, double beta, int reps,
                                             const ModelConfig& base, int threads = 0)
{
    validate_grid(n_grid);
    if (reps < 2) {
        throw Error(Errc::config_error, "reps must be at least 2");
    }
    std::vector<ScalingRow> rows;
    for (int n : n_grid) {
        ModelConfig cfg = base;
        cfg.n = n;
        cfg.beta = beta;
        cfg.p.reset();
        cfg.seed = mix_seed(base.seed, static_cast<std::uint64_t>(n));
        const ModelSpec model = build_model(cfg);
        const double c_n = model.dims.c_n;
        std::vector<std::array<double, 3>> values(static_cast<std::size_t>(reps));
        parallel_for(values.size(), threads, [&](std::size_t r) {
            RandomStream rng(replication_seed(cfg.seed, r, 0));
            const Eigen::MatrixXd X = draw_entries(model.dims.m, model.dims.n, cfg.dist, rng);
            const Eigen::VectorXd xbar = X.rowwise().mean();
            const Eigen::VectorXd v = model.B * xbar;
            const Eigen::VectorXd w1 = model.B * X.col(0);
            const Eigen::VectorXd v1 = v - w1 / static_cast<double>(n);
            const double dev = v.squaredNorm() - c_n;
            const double cross = w1.dot(v1);
            const double mean_q = v1.squaredNorm();
            values[r] = {dev * dev, cross * cross, mean_q * mean_q};
        });
        ScalingRow row;
        row.n = n;
        row.p = model.dims.p;
        for (std::size_t k = 0; k < 3; ++k) {
            double sum = 0.0;
            double sum_sq = 0.0;
            for (const auto& v : values) {
                sum += v[k];
                sum_sq += v[k] * v[k];
            }
            const double mean = sum / reps;
            const double var = std::max(0.0, (sum_sq - reps * mean * mean) / (reps - 1));
            row.second_moment[k] = mean;
            row.std_error[k] = std::sqrt(var / reps);
        }
        rows.push_back(row);
    }
    return rows;
}

/// Least-squares fit of log(second moment) against log(n).
inline ScalingResult fit_scaling_exponent(ScalingQuantity quantity, const std::vector<ScalingRow>& rows, double beta)
{
    const auto k = static_cast<std::size_t>(quantity);
    const double count = static_cast<double>(rows.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& row : rows) {
        const double x = std::log(static_cast<double>(row.n));
        const double y = std::log(row.second_moment[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double cov = sxy - sx * sy / count;
    const double var_x = sxx - sx * sx / count;
    const double var_y = syy - sy * sy / count;
    ScalingResult out;
    out.quantity = quantity;
    out.slope = cov / var_x;
    out.intercept = (sy - out.slope * sx) / count;
    out.r2 = var_y > 0.0 ? (cov * cov) / (var_x * var_y) : 1.0;
    out.expected_slope = theoretical_slope(quantity, beta);
    out.values = rows;
    return out;
}

inline ScalingResult estimate_scaling_exponent(ScalingQuantity quantity, const std::vector<int>& n_grid, double beta,
                                               int reps, const ModelConfig& base = {}, int threads = 0)
{
    return fit_scaling_exponent(quantity, scaling_table(n_grid, beta, reps, base, threads), beta);
}

} // namespace rmtlab
