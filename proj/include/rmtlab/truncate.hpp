#pragma once

#include <cmath>
#include <limits>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "rmtlab/errors.hpp"
#include "rmtlab/model.hpp"

namespace rmtlab {

enum class TruncationMode { off, per_row, uniform_sigma };

inline TruncationMode parse_truncation_mode(std::string_view name)
{
    if (name == "off") return TruncationMode::off;
    if (name == "per_row") return TruncationMode::per_row;
    if (name == "uniform_sigma") return TruncationMode::uniform_sigma;
    throw Error(Errc::config_error, "unknown truncation mode '" + std::string(name) + "'");
}

inline std::string_view to_string(TruncationMode mode) noexcept
{
    switch (mode) {
    case TruncationMode::off: return "off";
    case TruncationMode::per_row: return "per_row";
    case TruncationMode::uniform_sigma: return "uniform_sigma";
    }
    return "unknown";
}

struct TruncationReport {
    double sigma_n = 1.0;
    Eigen::VectorXd thresholds;
    double fraction_truncated = 0.0;
    double max_abs_after = 0.0;
};

/// E[X·I(|X| ≤ t)], E[X²·I(|X| ≤ t)] and P(|X| > t) for a registry law.
struct TruncatedMoments {
    double mean = 0.0;
    double second = 1.0;
    double tail = 0.0;

    double variance() const noexcept { return second - mean * mean; }
};

inline TruncatedMoments truncated_moments(const EntryDistribution& dist, double t)
{
    if (std::isinf(t)) {
        return {};
    }
    switch (dist.kind) {
    case DistributionKind::gaussian: {
        const double density = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
        return {0.0, std::erf(t / std::sqrt(2.0)) - 2.0 * t * density, std::erfc(t / std::sqrt(2.0))};
    }
    case DistributionKind::rademacher:
        return t >= 1.0 ? TruncatedMoments{0.0, 1.0, 0.0} : TruncatedMoments{0.0, 0.0, 1.0};
    case DistributionKind::uniform_unit_var: {
        const double a = std::sqrt(3.0);
        if (t >= a) return {};
        return {0.0, t * t * t / (3.0 * a), 1.0 - t / a};
    }
    case DistributionKind::centered_exponential: {
        // X = E − 1 with E ~ Exp(1); |X| ≤ t  ⇔  E ∈ [max(0, 1 − t), 1 + t]
        const double lo = std::max(0.0, 1.0 - t);
        const double hi = 1.0 + t;
        const double elo = std::exp(-lo);
        const double ehi = std::exp(-hi);
        return {lo * elo - hi * ehi, (lo * lo + 1.0) * elo - (hi * hi + 1.0) * ehi, 1.0 - (elo - ehi)};
    }
    }
    return {};
}

inline Eigen::VectorXd column_norms(const Eigen::MatrixXd& B)
{
    return B.colwise().norm().transpose();
}

/// Clip each row i at thresholds(i), recentre by the exact clipped mean and rescale.
inline std::pair<Eigen::MatrixXd, TruncationReport> truncate_rows(const Eigen::MatrixXd& X,
                                                                  const Eigen::VectorXd& thresholds,
                                                                  const EntryDistribution& dist, TruncationMode mode)
{
    if (thresholds.size() != X.rows()) {
        throw Error(Errc::invalid_argument, "one threshold per row is required");
    }
    const Eigen::Index m = X.rows();
    const Eigen::Index n = X.cols();
    Eigen::VectorXd means(m);
    Eigen::VectorXd sigmas(m);
    double sigma_sq_sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const TruncatedMoments mom = truncated_moments(dist, thresholds(i));
        const double var = mom.variance();
        if (!(var > 0.0)) {
            throw Error(Errc::degenerate_row, "row " + std::to_string(i) + " has zero variance after truncation");
        }
        means(i) = mom.mean;
        sigmas(i) = std::sqrt(var);
        sigma_sq_sum += var;
    }

    TruncationReport report;
    report.thresholds = thresholds;
    report.sigma_n = m > 0 ? std::sqrt(sigma_sq_sum / static_cast<double>(m)) : 1.0;

    Eigen::MatrixXd out(m, n);
    long long clipped = 0;
    double max_abs = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double x = X(i, j);
            const double t = thresholds(i);
            if (std::isinf(t)) {
                out(i, j) = x;
            } else {
                const bool keep = std::abs(x) <= t;
                clipped += keep ? 0 : 1;
                const double sigma = mode == TruncationMode::uniform_sigma ? report.sigma_n : sigmas(i);
                out(i, j) = ((keep ? x : 0.0) - means(i)) / sigma;
            }
            max_abs = std::max(max_abs, std::abs(out(i, j)));
        }
    }
    report.fraction_truncated = X.size() > 0 ? static_cast<double>(clipped) / static_cast<double>(X.size()) : 0.0;
    report.max_abs_after = max_abs;
    return {std::move(out), std::move(report)};
}

/// Row cutoffs (n·p)^{1/4}/‖b_i‖, +∞ for null columns of B.
inline Eigen::VectorXd truncation_thresholds(const ModelSpec& model)
{
    const Eigen::VectorXd norms = column_norms(model.B);
    const double cut = std::pow(static_cast<double>(model.dims.n) * model.dims.p, 0.25);
    Eigen::VectorXd t(norms.size());
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        t(i) = norms(i) > 0.0 ? cut / norms(i) : std::numeric_limits<double>::infinity();
    }
    return t;
}

inline std::pair<Eigen::MatrixXd, TruncationReport> truncate_standardize(const Eigen::MatrixXd& X,
                                                                         const ModelSpec& model,
                                                                         const EntryDistribution& dist,
                                                                         TruncationMode mode = TruncationMode::per_row)
{
    if (X.rows() != model.dims.m || X.cols() != model.dims.n) {
        throw Error(Errc::invalid_argument, "entry matrix does not match the model dimensions");
    }
    return truncate_rows(X, truncation_thresholds(model), dist, mode);
}

} // namespace rmtlab
