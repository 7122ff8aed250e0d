#include <cmath>

#include <gtest/gtest.h>

#include "rmtlab/spectral.hpp"

using namespace rmtlab;

namespace {

Eigen::MatrixXd random_symmetric(int p, std::uint64_t seed)
{
    RandomStream rng(seed);
    Eigen::MatrixXd A(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = rng.normal();
    return A;
}

Eigen::MatrixXd random_spd(int p, std::uint64_t seed)
{
    const Eigen::MatrixXd G = random_symmetric(p, seed);
    return G * G.transpose() / p + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

// dense complex solve oracle for wᵀ(S − zI)⁻¹w
cplx dense_qform(const Eigen::MatrixXd& S, const Eigen::VectorXd& w, cplx z)
{
    const Eigen::MatrixXcd M = S.cast<cplx>() - z * Eigen::MatrixXcd::Identity(S.rows(), S.cols());
    const Eigen::VectorXcd x = M.partialPivLu().solve(w.cast<cplx>());
    return (w.cast<cplx>().transpose() * x)(0);
}

ModelSpec random_model(int p, int n, std::uint64_t seed)
{
    RandomStream rng(seed);
    return build_model(make_dimensions(p, 2 * p, 4 * p, n), GammaKind::gaussian_random,
                       UKind::random_semi_orthogonal, Eigen::VectorXd::Zero(2 * p), rng);
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

} // namespace

TEST(EigSym, Diagonal)
{
    const Eigen::Vector2d diag(5.0, 2.0);
    const SpectralDecomposition d = eig_sym(Eigen::MatrixXd(diag.asDiagonal()));
    EXPECT_EQ(d.eigenvalues(0), 2.0);
    EXPECT_EQ(d.eigenvalues(1), 5.0);
    EXPECT_EQ(max_abs(d.eigenvectors.cwiseAbs() - Eigen::MatrixXd{{0, 1}, {1, 0}}), 0.0);
    const SpectralDecomposition e = eig_sym(Eigen::MatrixXd(Eigen::Vector2d(2.0, 5.0).asDiagonal()));
    EXPECT_LE(max_abs(e.eigenvectors.cwiseAbs() - Eigen::MatrixXd::Identity(2, 2)), 0.0);
}

TEST(EigSym, Exchange)
{
    const SpectralDecomposition d = eig_sym(Eigen::MatrixXd{{0, 1}, {1, 0}});
    EXPECT_NEAR(d.eigenvalues(0), -1.0, 1e-15);
    EXPECT_NEAR(d.eigenvalues(1), 1.0, 1e-15);
}

TEST(EigSym, RandomReconstructionAndRowConvention)
{
    for (int p : {1, 2, 5, 8, 20, 33}) {
        const Eigen::MatrixXd A = random_symmetric(p, 100 + p);
        const SpectralDecomposition d = eig_sym(A);
        const double scale = 1.0 + max_abs(A);
        EXPECT_LE(max_abs(reconstruct(d) - A), 1e-9 * scale);
        EXPECT_LE(max_abs(d.eigenvectors * d.eigenvectors.transpose() - Eigen::MatrixXd::Identity(p, p)), 1e-9);
        for (int j = 0; j < p; ++j) {
            // rows are eigenvectors
            const Eigen::VectorXd v = d.eigenvectors.row(j).transpose();
            EXPECT_LE((A * v - d.eigenvalues(j) * v).cwiseAbs().maxCoeff(), 1e-9 * scale);
            if (j > 0) EXPECT_LE(d.eigenvalues(j - 1), d.eigenvalues(j));
        }
        EXPECT_LE(d.sweeps, jacobi_sweep_cap);
        // independent oracle for the spectrum
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(A);
        EXPECT_LE((ref.eigenvalues() - d.eigenvalues).cwiseAbs().maxCoeff(), 1e-10 * scale);
    }
}

TEST(EigSym, RejectsBadInput)
{
    EXPECT_THROW(eig_sym(Eigen::MatrixXd{{1, 2}, {3, 4}}), Error);
    EXPECT_THROW(eig_sym(Eigen::MatrixXd(2, 3)), Error);
    Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(2, 2);
    nan(0, 0) = std::nan("");
    EXPECT_THROW(eig_sym(nan), Error);
}

TEST(EigSym, RepeatedEigenvalues)
{
    const SpectralDecomposition d = eig_sym(Eigen::MatrixXd::Identity(4, 4) * 3.0);
    EXPECT_LE((d.eigenvalues.array() - 3.0).abs().maxCoeff(), 0.0);
    const Eigen::MatrixXd A = random_spd(6, 9);
    const SpectralDecomposition e = eig_sym(A);
    const Eigen::MatrixXd P = e.eigenvectors.topRows(1).transpose() * e.eigenvectors.topRows(1);
    const Eigen::MatrixXd spiked = Eigen::MatrixXd::Identity(6, 6) + 4.0 * P;
    const SpectralDecomposition s = eig_sym(spiked);
    EXPECT_NEAR(s.eigenvalues(5), 5.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-12);
}

TEST(MatrixFunction, Examples)
{
    const Eigen::MatrixXd A = random_symmetric(7, 3);
    const SpectralDecomposition d = eig_sym(A);
    EXPECT_LE(max_abs(apply_matrix_function(d, [](double x) { return x; }) - A), 1e-9);
    EXPECT_LE(max_abs(apply_matrix_function(d, [](double) { return 1.0; }) - Eigen::MatrixXd::Identity(7, 7)), 1e-10);
    EXPECT_LE(max_abs(apply_matrix_function(d, [](double x) { return x * x; }) - A * A), 1e-8);
    // linearity in f
    const auto f = [](double x) { return std::exp(0.3 * x); };
    const auto g = [](double x) { return x * x * x - 2.0; };
    const Eigen::MatrixXd lhs = apply_matrix_function(d, [&](double x) { return f(x) + g(x); });
    EXPECT_LE(max_abs(lhs - apply_matrix_function(d, f) - apply_matrix_function(d, g)), 1e-10 * (1 + max_abs(lhs)));
}

TEST(Covariance, HandArithmetic)
{
    RandomStream rng(1);
    const ModelSpec model = build_model(make_dimensions(1, 1, 1, 2), GammaKind::identity_padded,
                                        UKind::coordinate_selection, Eigen::VectorXd::Zero(1), rng);
    const SampleBatch batch = make_batch(model, Eigen::MatrixXd{{1.0, 3.0}});
    const CovarianceSet c = covariance_set(batch, model);
    EXPECT_DOUBLE_EQ(c.S_uncentered(0, 0), 5.0);
    EXPECT_DOUBLE_EQ(c.S_centered(0, 0), 1.0);
    EXPECT_EQ(c.relation_residual, 0.0);
}

TEST(Covariance, DegenerateCases)
{
    const ModelSpec model = random_model(2, 10, 4);
    Eigen::MatrixXd X(model.dims.m, 10);
    for (int j = 0; j < 10; ++j) X.col(j) = Eigen::VectorXd::LinSpaced(model.dims.m, -1.0, 2.0);
    const CovarianceSet c = covariance_set(make_batch(model, X), model);
    EXPECT_LE(max_abs(c.S_centered), 1e-14);
    const CovarianceSet z = covariance_set(make_batch(model, Eigen::MatrixXd::Zero(model.dims.m, 10)), model);
    EXPECT_EQ(max_abs(z.S_centered), 0.0);
    EXPECT_EQ(max_abs(z.S_uncentered), 0.0);
}

TEST(Covariance, RelationAndPSD)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ModelSpec model = random_model(5, 30, seed);
        RandomStream rng(seed * 7);
        const SampleBatch b = sample_batch(model, parse_distribution("centered_exponential"), rng);
        const CovarianceSet c = covariance_set(b, model);
        EXPECT_LE(c.relation_residual, 1e-10);
        EXPECT_GE(eig_sym(c.S_centered).eigenvalues(0), -1e-10);
        EXPECT_GE(eig_sym(c.S_uncentered).eigenvalues(0), -1e-10);
        // direct definition from the whitened observations
        Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(5, 5);
        for (int j = 0; j < 30; ++j) {
            const Eigen::VectorXd d = b.z_tilde.col(j) - b.z_tilde_bar;
            direct += d * d.transpose() / 30.0;
        }
        EXPECT_LE(max_abs(direct - c.S_centered), 1e-12);
    }
}

TEST(WeightedESD, Examples)
{
    const SpectralDecomposition d = eig_sym(Eigen::MatrixXd(Eigen::Vector2d(1.0, 2.0).asDiagonal()));
    const WeightedESD w = weighted_esd(d, Eigen::Vector2d(3.0, 4.0) / 5.0);
    EXPECT_NEAR(w.weights(0), 9.0 / 25.0, 1e-15);
    EXPECT_NEAR(w.weights(1), 16.0 / 25.0, 1e-15);

    const Eigen::MatrixXd A = random_symmetric(6, 5);
    const SpectralDecomposition e = eig_sym(A);
    const WeightedESD aligned = weighted_esd(e, e.eigenvectors.row(2).transpose() * 3.0);
    EXPECT_NEAR(aligned.weights(2), 1.0, 1e-12);
    EXPECT_NEAR(aligned.weights.sum() - aligned.weights(2), 0.0, 1e-12);

    RandomStream rng(6);
    Eigen::VectorXd v(6);
    for (int k = 0; k < 6; ++k) v(k) = rng.normal();
    const WeightedESD r = weighted_esd(e, v);
    EXPECT_NEAR(r.total_mass, 1.0, 1e-12);
    EXPECT_TRUE((r.weights.array() >= 0.0).all());

    try {
        weighted_esd(e, Eigen::VectorXd::Zero(6));
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::zero_vector);
    }
}

TEST(Stieltjes, Examples)
{
    WeightedESD point{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0), 1.0};
    EXPECT_NEAR(std::abs(stieltjes(point, {0.0, 1.0}) - cplx(0.5, 0.5)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(limit_stieltjes({0.0, 1.0}) - cplx(0.5, 0.5)), 0.0, 1e-15);

    WeightedESD two{Eigen::Vector2d(1.0, 3.0), Eigen::Vector2d(0.5, 0.5), 1.0};
    EXPECT_NEAR(std::abs(stieltjes(two, 0.0) - 2.0 / 3.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(stieltjes(two, 2.0)), 0.0, 1e-15);
    try {
        stieltjes(two, 3.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::pole_hit);
    }
    EXPECT_THROW(limit_stieltjes(1.0), Error);
}

TEST(Resolvent, Examples)
{
    EXPECT_NEAR(std::abs(resolvent_qform(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Ones(1), 0.0) - 0.5),
                0.0, 1e-15);
    EXPECT_NEAR(std::abs(resolvent_qform(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2), {0.0, 1.0}) -
                         cplx(1.0, 1.0)),
                0.0, 1e-15);
    EXPECT_THROW(resolvent_qform(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2), 1.0), Error);
}

TEST(Resolvent, AgreesWithDenseSolve)
{
    for (int p : {6, 12, 32}) {
        const Eigen::MatrixXd S = random_spd(p, 40 + p);
        const SpectralDecomposition d = eig_sym(S);
        RandomStream rng(p);
        Eigen::VectorXd w(p);
        for (int k = 0; k < p; ++k) w(k) = rng.normal();
        for (cplx z : {cplx(-1, 0), cplx(1, 1), cplx(0.5, -0.1), cplx(2, 0.1), cplx(1, 0.5)}) {
            const cplx ref = dense_qform(S, w, z);
            const cplx got = resolvent_qform(d, w, z);
            EXPECT_LE(std::abs(got - ref), 1e-9 * std::abs(ref)) << "p=" << p << " z=" << z;
            // ‖w‖²·m_{F}(z) path
            EXPECT_LE(std::abs(w.squaredNorm() * stieltjes(weighted_esd(d, w), z) - ref), 1e-9 * std::abs(ref));
        }
    }
}

TEST(RankOne, IdentityOnRandomInstances)
{
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const int p = 1 + static_cast<int>(seed % 20);
        const int n = p + 1 + static_cast<int>((seed * 13) % (50 - p));
        const ModelSpec model = random_model(p, n, seed);
        RandomStream rng(mix_seed(3, seed));
        const SampleBatch b = sample_batch(model, parse_distribution("gaussian"), rng);
        for (cplx z : {cplx(-1, 0), cplx(1, 1), cplx(2, 0.5)}) {
            EXPECT_LE(rank_one_identity_residual(b, model, z), 1e-8) << "p=" << p << " n=" << n << " z=" << z;
        }
    }
}

TEST(RankOne, ZeroData)
{
    const ModelSpec model = random_model(3, 10, 2);
    const SampleBatch b = make_batch(model, Eigen::MatrixXd::Zero(model.dims.m, 10));
    EXPECT_EQ(rank_one_identity_residual(b, model, {-1.0, 0.0}), 0.0);
}

TEST(Concentration, EigenvaluesAndWeightedMassAtDeskScale)
{
    const int n = 4000;
    const Dimensions dims = dims_from_regime(n, 0.4, 1.0);
    RandomStream mrng(5);
    const ModelSpec model = build_model(dims, GammaKind::gaussian_random, UKind::random_semi_orthogonal,
                                        Eigen::VectorXd::Zero(dims.q), mrng);
    const int R = 200;
    int inside = 0;
    double mass = 0.0;
    for (int r = 0; r < R; ++r) {
        RandomStream rng(mix_seed(8, r));
        const SampleBatch b = sample_batch(model, parse_distribution("gaussian"), rng);
        const CovarianceSet c = covariance_set(b, model);
        const SpectralDecomposition u = eig_sym(c.S_uncentered);
        const double dev = std::max(std::abs(u.eigenvalues(0) - 1.0), std::abs(u.eigenvalues(dims.p - 1) - 1.0));
        inside += dev <= 0.3 ? 1 : 0;
        mass += weighted_esd(eig_sym(c.S_centered), b.Bxbar).mass_outside(0.7, 1.3);
    }
    EXPECT_GE(inside, static_cast<int>(std::ceil(0.99 * R)));
    EXPECT_LE(mass / R, 0.01);
}
