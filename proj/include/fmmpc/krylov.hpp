#ifndef FMMPC_KRYLOV_HPP
#define FMMPC_KRYLOV_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <fmmpc/sparse.hpp>

namespace fmmpc
{

// Matrix-free square operator: only the action on a vector is required.
class LinearOperator
{
public:
    using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

    LinearOperator() = default;
    LinearOperator(std::size_t n, ApplyFn fn) : m_size(n), m_apply(std::move(fn)) {}

    static LinearOperator identity(std::size_t n)
    {
        return {n, [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); }};
    }

    static LinearOperator from_matrix(CsrMatrix m)
    {
        if (m.rows() != m.cols()) {
            throw std::invalid_argument("operator matrix must be square");
        }
        auto shared = std::make_shared<const CsrMatrix>(std::move(m));
        return {shared->rows(), [shared](std::span<const double> x, std::span<double> y) { shared->multiply(x, y); }};
    }

    std::size_t size() const { return m_size; }

    void apply(std::span<const double> x, std::span<double> y) const
    {
        if (x.size() != m_size || y.size() != m_size) {
            throw std::invalid_argument("dimension mismatch in LinearOperator::apply");
        }
        m_apply(x, y);
    }

    std::vector<double> operator()(std::span<const double> x) const
    {
        std::vector<double> y(m_size);
        apply(x, y);
        return y;
    }

private:
    std::size_t m_size = 0;
    ApplyFn m_apply;
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> residual_history; // relative residuals, history[0] == 1
    bool converged = false;
    bool breakdown = false; // CG met p^T A p <= 0
    double setup_time = 0;  // filled in by callers that build a preconditioner
    double apply_time = 0;  // seconds spent inside preconditioner applications
    double total_time = 0;

    double final_relres() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

namespace detail
{

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

using clock = std::chrono::steady_clock;

inline double seconds_since(clock::time_point t0)
{
    return std::chrono::duration<double>(clock::now() - t0).count();
}

} // namespace detail

// Preconditioned conjugate gradients from a zero initial iterate. Stops when
// ||r_k|| / ||b|| <= tol, with r_k the recurrence residual.
inline SolveResult pcg(const LinearOperator &A, const LinearOperator &P, std::span<const double> b, double tol = 1e-6,
                       int maxit = 20)
{
    const auto t0 = detail::clock::now();
    const std::size_t n = A.size();
    if (b.size() != n || P.size() != n) {
        throw std::invalid_argument("dimension mismatch in pcg");
    }
    SolveResult res;
    res.x.assign(n, 0.0);
    auto &rep = res.report;
    rep.residual_history.push_back(1.0);
    const double bnorm = detail::norm2(b);
    if (bnorm == 0) {
        rep.converged = true;
        rep.total_time = detail::seconds_since(t0);
        return res;
    }

    std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
    auto precondition = [&] {
        const auto ta = detail::clock::now();
        P.apply(r, z);
        rep.apply_time += detail::seconds_since(ta);
    };
    precondition();
    p = z;
    double rz = detail::dot(r, z);

    for (int k = 1; k <= maxit; ++k) {
        A.apply(p, q);
        const double pq = detail::dot(p, q);
        if (!(pq > 0)) {
            rep.breakdown = true;
            break;
        }
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        const double rel = detail::norm2(r) / bnorm;
        rep.residual_history.push_back(rel);
        rep.iterations = k;
        if (rel <= tol) {
            rep.converged = true;
            break;
        }
        precondition();
        const double rz_next = detail::dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = z[i] + beta * p[i];
        }
    }
    rep.total_time = detail::seconds_since(t0);
    return res;
}

// Preconditioned MINRES for symmetric (possibly indefinite) A and SPD P, zero
// initial iterate. The residual is measured in the P^{-1} norm, relative to
// its initial value.
inline SolveResult minres(const LinearOperator &A, const LinearOperator &P, std::span<const double> b,
                          double tol = 1e-6, int maxit = 50)
{
    const auto t0 = detail::clock::now();
    const std::size_t n = A.size();
    if (b.size() != n || P.size() != n) {
        throw std::invalid_argument("dimension mismatch in minres");
    }
    SolveResult res;
    res.x.assign(n, 0.0);
    auto &rep = res.report;
    rep.residual_history.push_back(1.0);

    auto precondition = [&](std::span<const double> in, std::span<double> out) {
        const auto ta = detail::clock::now();
        P.apply(in, out);
        rep.apply_time += detail::seconds_since(ta);
    };

    std::vector<double> v_prev(n, 0.0), v(b.begin(), b.end()), v_next(n);
    std::vector<double> z(n), z_next(n), az(n);
    std::vector<double> w_prev(n, 0.0), w(n, 0.0), w_next(n);
    precondition(v, z);
    const double zv = detail::dot(z, v);
    if (zv < 0) {
        throw std::domain_error("preconditioner is not positive definite");
    }
    double gamma = std::sqrt(zv);
    if (gamma == 0) {
        rep.converged = true;
        rep.total_time = detail::seconds_since(t0);
        return res;
    }
    const double gamma1 = gamma;
    double gamma_prev = 1;
    double eta = gamma;
    double s_prev = 0, s = 0, c_prev = 1, c = 1;

    for (int j = 1; j <= maxit; ++j) {
        for (auto &zi : z) {
            zi /= gamma;
        }
        A.apply(z, az);
        const double delta = detail::dot(az, z);
        for (std::size_t i = 0; i < n; ++i) {
            v_next[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i];
        }
        precondition(v_next, z_next);
        const double zv_next = detail::dot(z_next, v_next);
        if (zv_next < 0) {
            throw std::domain_error("preconditioner is not positive definite");
        }
        const double gamma_next = std::sqrt(zv_next);

        const double a0 = c * delta - c_prev * s * gamma;
        const double a1 = std::sqrt(a0 * a0 + gamma_next * gamma_next);
        const double a2 = s * delta + c_prev * c * gamma;
        const double a3 = s_prev * gamma;
        const double c_next = a0 / a1;
        const double s_next = gamma_next / a1;
        for (std::size_t i = 0; i < n; ++i) {
            w_next[i] = (z[i] - a3 * w_prev[i] - a2 * w[i]) / a1;
            res.x[i] += c_next * eta * w_next[i];
        }
        eta = -s_next * eta;

        const double rel = std::abs(eta) / gamma1;
        rep.residual_history.push_back(rel);
        rep.iterations = j;
        if (rel <= tol || gamma_next == 0) {
            rep.converged = rel <= tol;
            break;
        }

        std::swap(v_prev, v);
        std::swap(v, v_next);
        std::swap(z, z_next);
        std::swap(w_prev, w);
        std::swap(w, w_next);
        gamma_prev = gamma;
        gamma = gamma_next;
        s_prev = s;
        s = s_next;
        c_prev = c;
        c = c_next;
    }
    rep.total_time = detail::seconds_since(t0);
    return res;
}

// ---------------------------------------------------------------------------
// Preconditioners

// Zero fill incomplete Cholesky A ~ L L^T; L has the lower pattern of A.
class IncompleteCholesky
{
public:
    explicit IncompleteCholesky(const CsrMatrix &A)
    {
        if (A.rows() != A.cols()) {
            throw std::invalid_argument("IC(0) needs a square matrix");
        }
        const std::size_t n = A.rows();
        std::vector<Triplet> lower;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
                if (A.col_idx()[k] <= r) {
                    lower.push_back({r, A.col_idx()[k], A.values()[k]});
                }
            }
        }
        m_factor = CsrMatrix::from_triplets(n, n, std::move(lower));
        auto &vals = const_cast<std::vector<double> &>(m_factor.values());
        const auto &ptr = m_factor.row_ptr();
        const auto &col = m_factor.col_idx();

        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t row_end = ptr[i + 1];
            if (row_end == ptr[i] || col[row_end - 1] != i) {
                throw std::domain_error("IC breakdown");
            }
            for (std::size_t kk = ptr[i]; kk < row_end; ++kk) {
                const std::size_t k = col[kk];
                // sum_{j < k} L_ij L_kj over the shared pattern
                double s = 0;
                std::size_t a = ptr[i], b = ptr[k];
                while (a < kk && b < ptr[k + 1] && col[b] < k) {
                    if (col[a] == col[b]) {
                        s += vals[a] * vals[b];
                        ++a;
                        ++b;
                    } else if (col[a] < col[b]) {
                        ++a;
                    } else {
                        ++b;
                    }
                }
                if (k < i) {
                    vals[kk] = (vals[kk] - s) / vals[ptr[k + 1] - 1];
                } else {
                    const double d = vals[kk] - s;
                    if (!(d > 0)) {
                        throw std::domain_error("IC breakdown");
                    }
                    vals[kk] = std::sqrt(d);
                }
            }
        }
    }

    const CsrMatrix &factor() const { return m_factor; }

    // z = (L L^T)^{-1} r
    void solve(std::span<const double> r, std::span<double> z) const
    {
        const std::size_t n = m_factor.rows();
        const auto &ptr = m_factor.row_ptr();
        const auto &col = m_factor.col_idx();
        const auto &val = m_factor.values();
        std::vector<double> y(r.begin(), r.end());
        for (std::size_t i = 0; i < n; ++i) {
            double s = y[i];
            for (std::size_t k = ptr[i]; k + 1 < ptr[i + 1]; ++k) {
                s -= val[k] * y[col[k]];
            }
            y[i] = s / val[ptr[i + 1] - 1];
        }
        for (std::size_t i = n; i-- > 0;) {
            const double zi = y[i] / val[ptr[i + 1] - 1];
            z[i] = zi;
            for (std::size_t k = ptr[i]; k + 1 < ptr[i + 1]; ++k) {
                y[col[k]] -= val[k] * zi;
            }
        }
    }

private:
    CsrMatrix m_factor;
};

inline LinearOperator ic0(const CsrMatrix &A)
{
    auto ic = std::make_shared<const IncompleteCholesky>(A);
    return {A.rows(), [ic](std::span<const double> r, std::span<double> z) { ic->solve(r, z); }};
}

inline LinearOperator jacobi(const CsrMatrix &A)
{
    auto d = std::make_shared<std::vector<double>>(A.diagonal());
    for (double v : *d) {
        if (v == 0) {
            throw std::domain_error("zero diagonal entry in Jacobi preconditioner");
        }
    }
    return {A.rows(), [d](std::span<const double> r, std::span<double> z) {
                for (std::size_t i = 0; i < r.size(); ++i) {
                    z[i] = r[i] / (*d)[i];
                }
            }};
}

// Inverse of a positive diagonal, e.g. the pressure mass diagonal.
inline LinearOperator diagonal_inverse(std::vector<double> diag)
{
    for (double v : diag) {
        if (!(v > 0)) {
            throw std::domain_error("diagonal preconditioner needs positive entries");
        }
    }
    auto d = std::make_shared<const std::vector<double>>(std::move(diag));
    return {d->size(), [d](std::span<const double> r, std::span<double> z) {
                for (std::size_t i = 0; i < r.size(); ++i) {
                    z[i] = r[i] / (*d)[i];
                }
            }};
}

// Sparse Cholesky solve, the "exact" preconditioner baseline.
inline LinearOperator exact_solve(const CsrMatrix &A)
{
    using Sparse = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(A.nonzeros());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
            t.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(A.col_idx()[k]), A.values()[k]);
        }
    }
    Sparse S(static_cast<Eigen::Index>(A.rows()), static_cast<Eigen::Index>(A.cols()));
    S.setFromTriplets(t.begin(), t.end());
    auto chol = std::make_shared<Eigen::SimplicialLLT<Sparse>>(S);
    if (chol->info() != Eigen::Success) {
        throw std::domain_error("Cholesky factorization failed");
    }
    return {A.rows(), [chol](std::span<const double> r, std::span<double> z) {
                const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
                Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())) = chol->solve(rv);
            }};
}

// blockdiag(P_A, ..., P_A, P_S) with `velocity_blocks` copies of P_A.
inline LinearOperator block_diag(LinearOperator velocity, LinearOperator pressure, std::size_t velocity_blocks = 2)
{
    const std::size_t nv = velocity.size();
    const std::size_t np = pressure.size();
    const std::size_t n = velocity_blocks * nv + np;
    return {n, [velocity = std::move(velocity), pressure = std::move(pressure), nv, np,
                velocity_blocks](std::span<const double> r, std::span<double> z) {
                for (std::size_t b = 0; b < velocity_blocks; ++b) {
                    velocity.apply(r.subspan(b * nv, nv), z.subspan(b * nv, nv));
                }
                pressure.apply(r.subspan(velocity_blocks * nv, np), z.subspan(velocity_blocks * nv, np));
            }};
}

// Relative asymmetry |<Pr, s> - <r, Ps>| / (||Pr|| ||s||), maximised over a few
// random vector pairs. Zero (to rounding) for a symmetric operator.
inline double symmetry_defect(const LinearOperator &P, int samples = 3, std::uint64_t seed = 7)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const std::size_t n = P.size();
    double worst = 0;
    std::vector<double> r(n), s(n);
    for (int k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = g(rng);
            s[i] = g(rng);
        }
        const auto pr = P(r);
        const auto ps = P(s);
        const double denom = detail::norm2(pr) * detail::norm2(s);
        worst = std::max(worst, std::abs(detail::dot(pr, s) - detail::dot(r, ps)) / denom);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Spectrum estimation

struct EigEstimate {
    double lambda_min = 0;
    double lambda_max = 0;
    double kappa = 0;
    int steps = 0;
    bool breakdown = false; // Krylov space exhausted before the requested steps
};

// Lanczos on P^{-1} A in the P inner product (plain Lanczos when no P is
// given); extreme Ritz values of the tridiagonal matrix estimate the extreme
// eigenvalues.
inline EigEstimate lanczos_extreme_eigs(const LinearOperator &A, const LinearOperator *P, int steps,
                                        std::uint64_t seed = 12345)
{
    if (steps < 10) {
        throw std::invalid_argument("lanczos needs at least 10 steps");
    }
    const std::size_t n = A.size();
    const int k_max = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(steps), n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v_prev(n, 0.0), v(n), v_next(n), z(n), z_next(n), az(n);
    for (auto &x : v) {
        x = u(rng);
    }
    auto precondition = [&](std::span<const double> in, std::span<double> out) {
        if (P != nullptr) {
            P->apply(in, out);
        } else {
            std::copy(in.begin(), in.end(), out.begin());
        }
    };
    precondition(v, z);
    double gamma = std::sqrt(detail::dot(z, v));
    double gamma_prev = 1;
    std::vector<double> diag, offdiag;
    EigEstimate est;

    for (int j = 0; j < k_max; ++j) {
        for (auto &zi : z) {
            zi /= gamma;
        }
        A.apply(z, az);
        const double delta = detail::dot(az, z);
        diag.push_back(delta);
        for (std::size_t i = 0; i < n; ++i) {
            v_next[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i];
        }
        precondition(v_next, z_next);
        const double zv = detail::dot(z_next, v_next);
        const double gamma_next = zv > 0 ? std::sqrt(zv) : 0.0;
        if (gamma_next <= 1e-14 * std::abs(delta)) {
            est.breakdown = true;
            break;
        }
        if (j + 1 < k_max) {
            offdiag.push_back(gamma_next);
        }
        std::swap(v_prev, v);
        std::swap(v, v_next);
        std::swap(z, z_next);
        gamma_prev = gamma;
        gamma = gamma_next;
    }

    const auto m = static_cast<Eigen::Index>(diag.size());
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(diag.data(), m);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(std::max<Eigen::Index>(m - 1, 0));
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
        e[i] = offdiag[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    est.lambda_min = solver.eigenvalues().minCoeff();
    est.lambda_max = solver.eigenvalues().maxCoeff();
    est.kappa = est.lambda_max / est.lambda_min;
    est.steps = static_cast<int>(m);
    return est;
}

} // namespace fmmpc

#endif
