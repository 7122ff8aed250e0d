#include <cmath>
#include <functional>
#include <limits>

#include <gtest/gtest.h>

#include "rmtlab/truncate.hpp"

using namespace rmtlab;

namespace {

// composite Simpson on [a, b]
double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000)
{
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

ModelSpec identity_model(int p, int n)
{
    RandomStream rng(1);
    return build_model(make_dimensions(p, p, p, n), GammaKind::identity_padded, UKind::coordinate_selection,
                       Eigen::VectorXd::Zero(p), rng);
}

ModelSpec random_model(int p, int n, std::uint64_t seed)
{
    RandomStream rng(seed);
    return build_model(make_dimensions(p, 2 * p, 4 * p, n), GammaKind::gaussian_random,
                       UKind::random_semi_orthogonal, Eigen::VectorXd::Zero(2 * p), rng);
}

} // namespace

TEST(TruncatedMoments, GaussianAgainstQuadrature)
{
    const auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
    for (double t : {0.3, 1.0, 1.7, 3.0}) {
        const TruncatedMoments m = truncated_moments(parse_distribution("gaussian"), t);
        EXPECT_NEAR(m.mean, 0.0, 1e-15);
        EXPECT_NEAR(m.second, simpson([&](double x) { return x * x * phi(x); }, -t, t), 1e-12);
        EXPECT_NEAR(m.tail, 1.0 - simpson(phi, -t, t), 1e-12);
    }
}

TEST(TruncatedMoments, ExponentialAgainstQuadrature)
{
    // X = E − 1, density e^{−(x+1)} on x > −1
    const auto dens = [](double x) { return x < -1.0 ? 0.0 : std::exp(-(x + 1.0)); };
    for (double t : {0.4, 1.0, 2.5, 6.0}) {
        const double lo = std::max(-1.0, -t);
        const TruncatedMoments m = truncated_moments(parse_distribution("centered_exponential"), t);
        EXPECT_NEAR(m.mean, simpson([&](double x) { return x * dens(x); }, lo, t), 1e-11) << t;
        EXPECT_NEAR(m.second, simpson([&](double x) { return x * x * dens(x); }, lo, t), 1e-11) << t;
        EXPECT_NEAR(m.tail, 1.0 - simpson(dens, lo, t), 1e-11) << t;
    }
}

TEST(TruncatedMoments, UniformAndRademacher)
{
    const double a = std::sqrt(3.0);
    const auto dens = [&](double) { return 1.0 / (2.0 * a); };
    for (double t : {0.5, 1.2}) {
        const TruncatedMoments m = truncated_moments(parse_distribution("uniform_unit_var"), t);
        EXPECT_NEAR(m.second, simpson([&](double x) { return x * x * dens(x); }, -t, t), 1e-12);
        EXPECT_NEAR(m.tail, 1.0 - t / a, 1e-15);
    }
    const TruncatedMoments full = truncated_moments(parse_distribution("uniform_unit_var"), 2.0);
    EXPECT_DOUBLE_EQ(full.variance(), 1.0);
    EXPECT_DOUBLE_EQ(truncated_moments(parse_distribution("rademacher"), 1.0).variance(), 1.0);
    EXPECT_DOUBLE_EQ(truncated_moments(parse_distribution("rademacher"), 0.9).variance(), 0.0);
}

TEST(ColumnNorms, Examples)
{
    EXPECT_EQ(column_norms(Eigen::MatrixXd::Identity(2, 2)), Eigen::Vector2d(1.0, 1.0));
    EXPECT_EQ(column_norms(Eigen::MatrixXd::Zero(2, 3)), Eigen::Vector3d::Zero());
    Eigen::Matrix2d B;
    B << 1.0, 0.0, 0.0, 0.6;
    EXPECT_NEAR((column_norms(B) - Eigen::Vector2d(1.0, 0.6)).norm(), 0.0, 1e-15);
}

TEST(Truncate, RademacherIsUntouched)
{
    const ModelSpec model = random_model(3, 40, 2);
    RandomStream rng(3);
    const EntryDistribution dist = parse_distribution("rademacher");
    const Eigen::MatrixXd X = draw_entries(model.dims.m, model.dims.n, dist, rng);
    auto [Xh, rep] = truncate_standardize(X, model, dist);
    EXPECT_TRUE((Xh.array() == X.array()).all());
    EXPECT_EQ(rep.sigma_n, 1.0);
    EXPECT_EQ(rep.fraction_truncated, 0.0);
    EXPECT_TRUE((rep.thresholds.array() >= 1.0).all());
}

TEST(Truncate, NullColumnHasInfiniteThreshold)
{
    RandomStream rng(1);
    const ModelSpec model = build_model(make_dimensions(1, 2, 2, 10), GammaKind::identity_padded,
                                        UKind::coordinate_selection, Eigen::VectorXd::Zero(2), rng);
    const Eigen::VectorXd t = truncation_thresholds(model);
    EXPECT_NEAR(t(0), std::pow(10.0, 0.25), 1e-14);
    EXPECT_TRUE(std::isinf(t(1)));
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 10);
    X.row(1).setConstant(100.0);
    X.row(0).setConstant(0.5);
    auto [Xh, rep] = truncate_standardize(X, model, parse_distribution("gaussian"));
    EXPECT_TRUE((Xh.row(1).array() == 100.0).all());
}

TEST(Truncate, ThresholdFormulaAndBound)
{
    const ModelSpec model = random_model(4, 64, 5);
    const Eigen::VectorXd norms = column_norms(model.B);
    const Eigen::VectorXd t = truncation_thresholds(model);
    const double cut = std::pow(64.0 * 4.0, 0.25);
    for (Eigen::Index i = 0; i < t.size(); ++i) EXPECT_NEAR(t(i), cut / norms(i), 1e-12 * t(i));

    for (const char* name : {"gaussian", "centered_exponential", "uniform_unit_var"}) {
        const EntryDistribution dist = parse_distribution(name);
        RandomStream rng(17);
        const Eigen::MatrixXd X = draw_entries(model.dims.m, model.dims.n, dist, rng);
        auto [Xh, rep] = truncate_standardize(X, model, dist);
        EXPECT_LE(rep.sigma_n, 1.0 + 1e-12);
        for (Eigen::Index i = 0; i < Xh.rows(); ++i) {
            EXPECT_LE(Xh.row(i).cwiseAbs().maxCoeff() * norms(i), 2.0 * cut) << name;
        }
        auto [Xu, repu] = truncate_standardize(X, model, dist, TruncationMode::uniform_sigma);
        EXPECT_EQ(repu.sigma_n, rep.sigma_n);
    }
}

TEST(Truncate, DegenerateRow)
{
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 5);
    try {
        truncate_rows(X, Eigen::VectorXd::Constant(1, 0.5), parse_distribution("rademacher"), TruncationMode::per_row);
        FAIL() << "expected degenerate_row";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::degenerate_row);
    }
}

TEST(Truncate, FractionMatchesNormalTail)
{
    // explicit threshold with a sizeable tail, then the p = 4, n = 256 unit-norm setting
    {
        RandomStream rng(8);
        const int rows = 4;
        const int cols = 100000;
        const Eigen::MatrixXd X = draw_entries(rows, cols, parse_distribution("gaussian"), rng);
        auto [Xh, rep] = truncate_rows(X, Eigen::VectorXd::Constant(rows, 1.5), parse_distribution("gaussian"),
                                       TruncationMode::per_row);
        const double expected = 2.0 * 0.5 * std::erfc(1.5 / std::sqrt(2.0));
        const double se = std::sqrt(expected * (1 - expected) / (rows * cols));
        EXPECT_LE(std::abs(rep.fraction_truncated - expected), 3.0 * se);
    }
    {
        const ModelSpec model = identity_model(4, 256);
        const double t = std::pow(256.0 * 4.0, 0.25);
        const double expected = std::erfc(t / std::sqrt(2.0));
        const EntryDistribution dist = parse_distribution("gaussian");
        long long clipped = 0;
        long long total = 0;
        for (int r = 0; r < 200; ++r) {
            RandomStream rng(mix_seed(21, r));
            const Eigen::MatrixXd X = draw_entries(4, 256, dist, rng);
            auto [Xh, rep] = truncate_standardize(X, model, dist);
            clipped += std::llround(rep.fraction_truncated * X.size());
            total += X.size();
        }
        const double frac = static_cast<double>(clipped) / total;
        const double se = std::sqrt(expected * (1 - expected) / total);
        EXPECT_LE(std::abs(frac - expected), 3.0 * se + 1.0 / total);
    }
}

TEST(Truncate, IdempotentWhenNothingClipped)
{
    const ModelSpec model = random_model(8, 4096, 6);
    const EntryDistribution dist = parse_distribution("gaussian");
    RandomStream rng(4);
    const Eigen::MatrixXd X = draw_entries(model.dims.m, model.dims.n, dist, rng);
    auto [once, r1] = truncate_standardize(X, model, dist);
    ASSERT_EQ(r1.fraction_truncated, 0.0);
    auto [twice, r2] = truncate_standardize(once, model, dist);
    EXPECT_LE((twice - once).cwiseAbs().maxCoeff(), 1e-8 * once.cwiseAbs().maxCoeff());
}

TEST(Truncate, MomentPreservation)
{
    const ModelSpec model = random_model(8, 4096, 9);
    const EntryDistribution dist = parse_distribution("gaussian");
    double s1 = 0, s2 = 0;
    long long count = 0;
    for (int r = 0; count < 1000000; ++r) {
        RandomStream rng(mix_seed(31, r));
        auto [Xh, rep] = truncate_standardize(draw_entries(model.dims.m, model.dims.n, dist, rng), model, dist);
        s1 += Xh.sum();
        s2 += Xh.squaredNorm();
        count += Xh.size();
    }
    const double mean = s1 / count;
    const double var = s2 / count - mean * mean;
    EXPECT_LE(std::abs(mean), 5.0 * std::sqrt(var / count));
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(Truncate, FractionNonIncreasingInN)
{
    const EntryDistribution dist = parse_distribution("gaussian");
    double previous = 1.0;
    for (int n : {16, 64, 256, 1024}) {
        const ModelSpec model = random_model(2, n, 3);
        double sum = 0;
        const int reps = 400000 / (model.dims.m * n) + 1;
        for (int r = 0; r < reps; ++r) {
            RandomStream rng(mix_seed(n, r));
            sum += truncate_standardize(draw_entries(model.dims.m, n, dist, rng), model, dist).second.fraction_truncated;
        }
        const double frac = sum / reps;
        EXPECT_LE(frac, previous) << "n=" << n;
        previous = frac;
    }
}

TEST(TruncationMode, Parse)
{
    EXPECT_EQ(parse_truncation_mode("off"), TruncationMode::off);
    EXPECT_EQ(parse_truncation_mode("per_row"), TruncationMode::per_row);
    EXPECT_EQ(parse_truncation_mode("uniform_sigma"), TruncationMode::uniform_sigma);
    EXPECT_THROW(parse_truncation_mode("sometimes"), Error);
}
