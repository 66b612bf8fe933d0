#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <fmmpc/fem.hpp>
#include <fmmpc/krylov.hpp>

using namespace fmmpc;

namespace
{

CsrMatrix from_dense(const Eigen::MatrixXd &d)
{
    std::vector<Triplet> t;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.cols(); ++c) {
            if (d(r, c) != 0) {
                t.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c), d(r, c)});
            }
        }
    }
    return CsrMatrix::from_triplets(static_cast<std::size_t>(d.rows()), static_cast<std::size_t>(d.cols()), t);
}

Eigen::MatrixXd random_spd(int n, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            m(i, j) = g(rng);
        }
    }
    return m.transpose() * m + n * Eigen::MatrixXd::Identity(n, n);
}

CsrMatrix laplacian(std::size_t n)
{
    return assemble_poisson_q1(make_poisson_problem(PoissonProblemId::p1), UniformGrid(n)).matrix;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

} // namespace

TEST(LinearOperator, Basics)
{
    const auto I = LinearOperator::identity(3);
    EXPECT_EQ(I(std::vector<double>{1, 2, 3}), (std::vector<double>{1, 2, 3}));
    std::vector<double> y(2);
    EXPECT_THROW(I.apply(std::vector<double>{1, 2, 3}, y), std::invalid_argument);
}

TEST(Pcg, IdentityConvergesInOneStep)
{
    const auto I = LinearOperator::identity(10);
    const auto res = pcg(I, I, ones(10), 1e-10, 20);
    EXPECT_TRUE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 1);
    EXPECT_EQ(res.x, ones(10));
}

TEST(Pcg, ZeroRightHandSide)
{
    const auto I = LinearOperator::identity(4);
    const auto res = pcg(I, I, std::vector<double>(4, 0.0));
    EXPECT_TRUE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 0);
}

TEST(Pcg, RandomSpdMatchesDenseSolve)
{
    const auto d = random_spd(50, 3);
    const auto A = LinearOperator::from_matrix(from_dense(d));
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(50, -1, 2);
    const std::vector<double> bv(b.data(), b.data() + 50);
    const auto res = pcg(A, LinearOperator::identity(50), bv, 1e-12, 200);
    ASSERT_TRUE(res.report.converged);
    const Eigen::VectorXd ref = d.ldlt().solve(b);
    for (int i = 0; i < 50; ++i) {
        EXPECT_NEAR(res.x[static_cast<std::size_t>(i)], ref(i), 1e-9 * ref.norm());
    }
}

TEST(Pcg, ErrorEnergyNormDecreases)
{
    const auto a = laplacian(16);
    const auto A = LinearOperator::from_matrix(a);
    const auto b = ones(a.rows());
    const auto x_star = exact_solve(a)(b);
    const double e0 = detail::dot(x_star, A(x_star));
    double prev = e0;
    for (int k = 1; k <= 25; ++k) {
        const auto x = pcg(A, ic0(a), b, 0.0, k).x;
        std::vector<double> e(x.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = x[i] - x_star[i];
        }
        const double energy = detail::dot(e, A(e));
        // allow for rounding once the error reaches machine precision
        EXPECT_LE(energy, prev * (1 + 1e-12) + 1e-24 * e0) << k;
        prev = energy;
    }
}

TEST(Pcg, ExactPreconditionerOneIteration)
{
    const auto a = laplacian(32);
    const auto res = pcg(LinearOperator::from_matrix(a), exact_solve(a), ones(a.rows()), 1e-6, 20);
    EXPECT_TRUE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 1);
}

TEST(Pcg, UnpreconditionedIterationsGrowLikeOneOverH)
{
    const auto a16 = laplacian(16), a32 = laplacian(32), a64 = laplacian(64);
    auto its = [](const CsrMatrix &a) {
        const auto r = pcg(LinearOperator::from_matrix(a), LinearOperator::identity(a.rows()), ones(a.rows()), 1e-8,
                           2000);
        EXPECT_TRUE(r.report.converged);
        return static_cast<double>(r.report.iterations);
    };
    const double i16 = its(a16), i32 = its(a32), i64 = its(a64);
    EXPECT_GE(i32 / i16, 1.7);
    EXPECT_LE(i32 / i16, 2.3);
    EXPECT_GE(i64 / i32, 1.7);
    EXPECT_LE(i64 / i32, 2.3);
}

TEST(Pcg, ReportsNonConvergenceAndIndefiniteBreakdown)
{
    const auto a = laplacian(32);
    const auto res = pcg(LinearOperator::from_matrix(a), LinearOperator::identity(a.rows()), ones(a.rows()), 1e-10, 3);
    EXPECT_FALSE(res.report.converged);
    EXPECT_EQ(res.report.iterations, 3);
    EXPECT_EQ(res.report.residual_history.size(), 4u);

    const auto neg = LinearOperator::from_matrix(CsrMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, -2.0}}));
    const auto br = pcg(neg, LinearOperator::identity(2), ones(2));
    EXPECT_TRUE(br.report.breakdown);
    EXPECT_FALSE(br.report.converged);
}

TEST(Minres, IndefiniteDiagonal)
{
    const auto A = LinearOperator::from_matrix(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}}));
    const auto res = minres(A, LinearOperator::identity(2), std::vector<double>{1, 1}, 1e-12, 10);
    ASSERT_TRUE(res.report.converged);
    EXPECT_LE(res.report.iterations, 2);
    EXPECT_NEAR(res.x[0], 1.0, 1e-12);
    EXPECT_NEAR(res.x[1], -1.0, 1e-12);
}

TEST(Minres, ResidualIsMonotoneAndSolutionCorrect)
{
    const UniformGrid g(8);
    const auto sys = assemble_stokes_q1p0(g);
    const auto K = sys.assembled();
    const auto A = LinearOperator::from_matrix(K);
    const auto P = block_diag(jacobi(sys.velocity_laplacian.block(0, 0, sys.velocity_block, sys.velocity_block)),
                              diagonal_inverse(pressure_mass_diag(g)));
    const auto res = minres(A, P, sys.rhs, 1e-10, 500);
    ASSERT_TRUE(res.report.converged);
    const auto &h = res.report.residual_history;
    for (std::size_t k = 1; k < h.size(); ++k) {
        EXPECT_LE(h[k], h[k - 1] * (1 + 1e-10));
    }
    const auto r = K * res.x;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        num += (r[i] - sys.rhs[i]) * (r[i] - sys.rhs[i]);
        den += sys.rhs[i] * sys.rhs[i];
    }
    EXPECT_LT(std::sqrt(num / den), 1e-7);
}

TEST(Minres, RejectsIndefinitePreconditioner)
{
    const auto I = LinearOperator::identity(2);
    const auto neg = LinearOperator(2, [](std::span<const double> x, std::span<double> y) {
        y[0] = -x[0];
        y[1] = -x[1];
    });
    EXPECT_THROW(minres(I, neg, ones(2)), std::domain_error);
}

TEST(IncompleteCholesky, ExactOnDiagonalAndTridiagonal)
{
    const auto diag = CsrMatrix::from_triplets(3, 3, {{0, 0, 4.0}, {1, 1, 9.0}, {2, 2, 1.0}});
    const IncompleteCholesky d(diag);
    EXPECT_DOUBLE_EQ(d.factor().at(1, 1), 3.0);

    // no fill for a tridiagonal matrix, so IC(0) is the exact Cholesky factor
    const int n = 20;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        t(i, i) = 2;
        if (i > 0) {
            t(i, i - 1) = t(i - 1, i) = -1;
        }
    }
    const IncompleteCholesky ic(from_dense(t));
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(t).matrixL();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            EXPECT_NEAR(ic.factor().at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), L(i, j), 1e-13);
        }
    }
    const auto P = ic0(from_dense(t));
    const auto res = pcg(LinearOperator::from_matrix(from_dense(t)), P, ones(n), 1e-12, 5);
    EXPECT_EQ(res.report.iterations, 1);
}

TEST(IncompleteCholesky, PatternAndBreakdown)
{
    const auto a = laplacian(8);
    const IncompleteCholesky ic(a);
    // lower triangle of the 9-point pattern: (nnz + n) / 2 entries
    EXPECT_EQ(ic.factor().nonzeros(), (a.nonzeros() + a.rows()) / 2);
    EXPECT_THROW(IncompleteCholesky(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}})),
                 std::domain_error);
    EXPECT_THROW(IncompleteCholesky(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}})), std::domain_error);
}

TEST(IncompleteCholesky, IterationsOnPoissonGrowWithRefinement)
{
    std::vector<int> its;
    for (std::size_t n : {16u, 32u, 64u}) {
        const auto a = laplacian(n);
        const auto res = pcg(LinearOperator::from_matrix(a), ic0(a), ones(a.rows()), 1e-6, 200);
        ASSERT_TRUE(res.report.converged);
        its.push_back(res.report.iterations);
    }
    EXPECT_LT(its[0], its[1]);
    EXPECT_LT(its[1], its[2]);
}

TEST(Preconditioners, JacobiDiagonalAndBlocks)
{
    const auto a = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 4.0}, {0, 1, 1.0}});
    EXPECT_EQ(jacobi(a)(std::vector<double>{2, 2}), (std::vector<double>{1, 0.5}));
    EXPECT_THROW(jacobi(CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}})), std::domain_error);
    EXPECT_THROW(diagonal_inverse({1.0, 0.0}), std::domain_error);

    const auto P = block_diag(diagonal_inverse({2.0}), diagonal_inverse({4.0, 8.0}), 2);
    EXPECT_EQ(P.size(), 4u);
    EXPECT_EQ(P(std::vector<double>{2, 4, 4, 8}), (std::vector<double>{1, 2, 1, 1}));
    EXPECT_LT(symmetry_defect(P), 1e-15);
    const LinearOperator skew(2, [](std::span<const double> x, std::span<double> y) {
        y[0] = x[1];
        y[1] = -x[0];
    });
    EXPECT_GT(symmetry_defect(skew), 0.1);
}

TEST(ExactSolve, RoundTripAndFailure)
{
    const auto d = random_spd(30, 9);
    const auto a = from_dense(d);
    const auto x = exact_solve(a)(a * ones(30));
    for (double v : x) {
        EXPECT_NEAR(v, 1.0, 1e-12);
    }
    EXPECT_THROW(exact_solve(CsrMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, 1.0}})), std::domain_error);
}

TEST(Lanczos, DiagonalSpectrum)
{
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < 10; ++i) {
        t.push_back({i, i, static_cast<double>(i + 1)});
    }
    const auto A = LinearOperator::from_matrix(CsrMatrix::from_triplets(10, 10, t));
    const auto e = lanczos_extreme_eigs(A, nullptr, 10);
    EXPECT_NEAR(e.lambda_min, 1.0, 1e-8);
    EXPECT_NEAR(e.lambda_max, 10.0, 1e-8);
    EXPECT_NEAR(e.kappa, 10.0, 1e-7);
    EXPECT_THROW(lanczos_extreme_eigs(A, nullptr, 9), std::invalid_argument);
}

TEST(Lanczos, PreconditionedMatchesGeneralizedEigenproblem)
{
    const auto a = laplacian(8);
    const auto dense_a = [&] {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(49, 49);
        for (std::size_t i = 0; i < 49; ++i) {
            for (std::size_t j = 0; j < 49; ++j) {
                d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.at(i, j);
            }
        }
        return d;
    }();
    const Eigen::VectorXd diag = dense_a.diagonal();
    const Eigen::MatrixXd s = diag.cwiseInverse().cwiseSqrt().asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s * dense_a * s, Eigen::EigenvaluesOnly);
    const auto P = jacobi(a);
    const auto e = lanczos_extreme_eigs(LinearOperator::from_matrix(a), &P, 49);
    EXPECT_NEAR(e.lambda_min, es.eigenvalues().minCoeff(), 1e-8);
    EXPECT_NEAR(e.lambda_max, es.eigenvalues().maxCoeff(), 1e-8);
}
