#ifndef FMMPC_FEM_HPP
#define FMMPC_FEM_HPP

// Q1 finite element systems on the square [-1,1]^2 with a uniform grid of
// n x n square elements: scalar Poisson, and stabilized Q1-P0 Stokes.
// Dirichlet nodes are eliminated, so all operators act on interior nodes only.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmmpc/geometry.hpp>
#include <fmmpc/sparse.hpp>

namespace fmmpc
{

class UniformGrid
{
public:
    explicit UniformGrid(std::size_t elements_per_side) : m_n(elements_per_side)
    {
        if (m_n < 1) {
            throw std::invalid_argument("grid needs at least one element per side");
        }
    }

    // Grid whose element width is h; h must divide 2 evenly.
    static UniformGrid from_spacing(double h)
    {
        if (!(h > 0) || h > 2) {
            throw std::invalid_argument("grid spacing must lie in (0, 2]");
        }
        const double n = 2.0 / h;
        const double rounded = std::round(n);
        if (std::abs(n - rounded) > 1e-9 * rounded) {
            throw std::invalid_argument("grid spacing must divide 2 evenly");
        }
        return UniformGrid(static_cast<std::size_t>(rounded));
    }

    // Mesh named by a table label h: 1/h elements per side, so element width 2h.
    // This is the labelling under which a label of 2^-4 has lambda_min(A) ~ 0.076.
    static UniformGrid from_label(double h) { return from_spacing(2.0 * h); }

    std::size_t elements_per_side() const { return m_n; }
    double spacing() const { return 2.0 / static_cast<double>(m_n); }
    std::size_t nodes_per_side() const { return m_n + 1; }
    std::size_t num_elements() const { return m_n * m_n; }
    std::size_t interior_per_side() const { return m_n - 1; }
    std::size_t num_interior() const { return (m_n - 1) * (m_n - 1); }

    Point2 node(std::size_t i, std::size_t j) const
    {
        const double h = spacing();
        // Exact at the far edge so boundary coordinates are +-1 bit for bit.
        const double x = (i == m_n) ? 1.0 : -1.0 + static_cast<double>(i) * h;
        const double y = (j == m_n) ? 1.0 : -1.0 + static_cast<double>(j) * h;
        return {x, y};
    }

    bool is_boundary(std::size_t i, std::size_t j) const { return i == 0 || j == 0 || i == m_n || j == m_n; }

    // Index of interior node (i, j), 1 <= i, j <= n-1, in row-major order.
    std::size_t interior_index(std::size_t i, std::size_t j) const { return (j - 1) * (m_n - 1) + (i - 1); }

    std::vector<Point2> interior_nodes() const
    {
        std::vector<Point2> out;
        out.reserve(num_interior());
        for (std::size_t j = 1; j < m_n; ++j) {
            for (std::size_t i = 1; i < m_n; ++i) {
                out.push_back(node(i, j));
            }
        }
        return out;
    }

    // Corners of element (ei, ej) counterclockwise from the lower left.
    std::array<std::array<std::size_t, 2>, 4> element_nodes(std::size_t ei, std::size_t ej) const
    {
        return {{{ei, ej}, {ei + 1, ej}, {ei + 1, ej + 1}, {ei, ej + 1}}};
    }

private:
    std::size_t m_n;
};

enum class PoissonProblemId { p1, p2, p3 };

inline PoissonProblemId parse_problem_id(const std::string &name)
{
    if (name == "p1") {
        return PoissonProblemId::p1;
    }
    if (name == "p2") {
        return PoissonProblemId::p2;
    }
    if (name == "p3") {
        return PoissonProblemId::p3;
    }
    throw std::invalid_argument("unknown problem id: " + name);
}

inline std::string to_string(PoissonProblemId id)
{
    switch (id) {
    case PoissonProblemId::p1:
        return "p1";
    case PoissonProblemId::p2:
        return "p2";
    case PoissonProblemId::p3:
        return "p3";
    }
    return "?";
}

using ScalarField = std::function<double(Point2)>;

// -lap u = f in the square, u = g on its boundary.
struct PoissonProblem {
    PoissonProblemId id = PoissonProblemId::p1;
    ScalarField forcing;
    ScalarField boundary;
    std::optional<ScalarField> exact;
};

inline PoissonProblem make_poisson_problem(PoissonProblemId id)
{
    switch (id) {
    case PoissonProblemId::p1:
        return {id, [](Point2) { return 1.0; }, [](Point2) { return 0.0; }, std::nullopt};
    case PoissonProblemId::p2: {
        auto u = [](Point2 p) {
            const double a = 3 + p.x;
            const double b = 1 + p.y;
            return 2 * b / (a * a + b * b);
        };
        return {id, [](Point2) { return 0.0; }, u, u};
    }
    case PoissonProblemId::p3: {
        auto u = [](Point2 p) { return p.x * p.x + p.y * p.y; };
        return {id, [](Point2) { return -4.0; }, u, u};
    }
    }
    throw std::invalid_argument("unknown problem id");
}

struct PoissonSystem {
    CsrMatrix matrix;
    std::vector<double> rhs;
};

namespace detail
{

// Element stiffness of the bilinear element on a square, independent of its size.
// Local node order is counterclockwise from the lower left.
inline double q1_stiffness(int a, int b)
{
    if (a == b) {
        return 2.0 / 3.0;
    }
    return ((a + b) % 2 == 1) ? -1.0 / 6.0 : -1.0 / 3.0; // edge neighbour vs opposite corner
}

inline constexpr std::array<std::array<double, 2>, 4> q1_corner_sign{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};

// Bilinear shape function a at reference point (xi, eta) in [-1,1]^2.
inline double q1_shape(int a, double xi, double eta)
{
    return 0.25 * (1 + q1_corner_sign[a][0] * xi) * (1 + q1_corner_sign[a][1] * eta);
}

} // namespace detail

// Interior-node Q1 system: A symmetric positive definite, rhs holding the
// 2x2 Gauss load plus the eliminated Dirichlet data.
inline PoissonSystem assemble_poisson_q1(const PoissonProblem &problem, const UniformGrid &grid)
{
    const std::size_t n = grid.elements_per_side();
    const double h = grid.spacing();
    const std::size_t ni = grid.num_interior();
    std::vector<Triplet> entries;
    entries.reserve(16 * grid.num_elements());
    std::vector<double> rhs(ni, 0.0);
    const double gp = 1.0 / std::sqrt(3.0);
    const double jac = 0.25 * h * h;

    for (std::size_t ej = 0; ej < n; ++ej) {
        for (std::size_t ei = 0; ei < n; ++ei) {
            const auto nodes = grid.element_nodes(ei, ej);
            const Point2 lo = grid.node(ei, ej);
            std::array<double, 4> load{};
            for (double xi : {-gp, gp}) {
                for (double eta : {-gp, gp}) {
                    const Point2 x{lo.x + 0.5 * h * (1 + xi), lo.y + 0.5 * h * (1 + eta)};
                    const double fx = problem.forcing(x);
                    for (int a = 0; a < 4; ++a) {
                        load[a] += jac * fx * detail::q1_shape(a, xi, eta);
                    }
                }
            }
            for (int a = 0; a < 4; ++a) {
                const auto [ia, ja] = nodes[a];
                if (grid.is_boundary(ia, ja)) {
                    continue;
                }
                const std::size_t row = grid.interior_index(ia, ja);
                rhs[row] += load[a];
                for (int b = 0; b < 4; ++b) {
                    const auto [ib, jb] = nodes[b];
                    const double k = detail::q1_stiffness(a, b);
                    if (grid.is_boundary(ib, jb)) {
                        rhs[row] -= k * problem.boundary(grid.node(ib, jb));
                    } else {
                        entries.push_back({row, grid.interior_index(ib, jb), k});
                    }
                }
            }
        }
    }
    return {CsrMatrix::from_triplets(ni, ni, std::move(entries)), std::move(rhs)};
}

// Exact solution sampled at the interior nodes (problems that have one).
inline std::vector<double> sample_interior(const ScalarField &u, const UniformGrid &grid)
{
    std::vector<double> out;
    out.reserve(grid.num_interior());
    for (const auto &p : grid.interior_nodes()) {
        out.push_back(u(p));
    }
    return out;
}

// Relative continuous L2 error of the bilinear interpolant of the nodal values
// (interior from u, boundary from the problem data) against the exact
// solution, by 3x3 Gauss quadrature per element.
inline double fem_l2_error(std::span<const double> u, const PoissonProblem &problem, const UniformGrid &grid)
{
    if (!problem.exact) {
        throw std::invalid_argument("problem has no analytic solution");
    }
    if (u.size() != grid.num_interior()) {
        throw std::invalid_argument("nodal vector size mismatch");
    }
    const std::size_t n = grid.elements_per_side();
    const double h = grid.spacing();
    const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    double err = 0, ref = 0;
    for (std::size_t ej = 0; ej < n; ++ej) {
        for (std::size_t ei = 0; ei < n; ++ei) {
            const auto nodes = grid.element_nodes(ei, ej);
            std::array<double, 4> val{};
            for (int a = 0; a < 4; ++a) {
                const auto [i, j] = nodes[a];
                val[a] = grid.is_boundary(i, j) ? problem.boundary(grid.node(i, j)) : u[grid.interior_index(i, j)];
            }
            const Point2 lo = grid.node(ei, ej);
            for (int qa = 0; qa < 3; ++qa) {
                for (int qb = 0; qb < 3; ++qb) {
                    double uh = 0;
                    for (int a = 0; a < 4; ++a) {
                        uh += val[a] * detail::q1_shape(a, gx[qa], gx[qb]);
                    }
                    const Point2 x{lo.x + 0.5 * h * (1 + gx[qa]), lo.y + 0.5 * h * (1 + gx[qb])};
                    const double ue = (*problem.exact)(x);
                    const double w = gw[qa] * gw[qb];
                    err += w * (uh - ue) * (uh - ue);
                    ref += w * ue * ue;
                }
            }
        }
    }
    return std::sqrt(err / ref);
}

// ---------------------------------------------------------------------------
// Stokes

// [A B^T; B -C] [u; p] = rhs, velocities ordered (x components, y components).
struct SaddleSystem {
    CsrMatrix velocity_laplacian; // 2N x 2N, block diagonal
    CsrMatrix divergence;         // M x 2N
    CsrMatrix stabilization;      // M x M
    std::vector<double> rhs;      // length 2N + M
    std::size_t velocity_block = 0; // N, interior nodes per component
    std::size_t num_pressure = 0;   // M, one per element

    std::size_t size() const { return 2 * velocity_block + num_pressure; }

    void apply(std::span<const double> x, std::span<double> y) const
    {
        const std::size_t nv = 2 * velocity_block;
        const auto xu = x.subspan(0, nv);
        const auto xp = x.subspan(nv, num_pressure);
        auto yu = y.subspan(0, nv);
        auto yp = y.subspan(nv, num_pressure);
        velocity_laplacian.multiply(xu, yu);
        divergence.multiply_transpose_add(xp, yu);
        divergence.multiply(xu, yp);
        std::vector<double> cp(num_pressure);
        stabilization.multiply(xp, cp);
        for (std::size_t i = 0; i < num_pressure; ++i) {
            yp[i] -= cp[i];
        }
    }

    CsrMatrix assembled() const
    {
        const std::size_t nv = 2 * velocity_block;
        std::vector<Triplet> t;
        velocity_laplacian.append_triplets(t, 0, 0);
        divergence.append_triplets(t, nv, 0);
        divergence.transpose().append_triplets(t, 0, nv);
        stabilization.append_triplets(t, nv, nv, -1.0);
        return CsrMatrix::from_triplets(size(), size(), std::move(t));
    }
};

struct StokesOptions {
    double stabilization_beta = 0.25;
};

// Leaky lid-driven cavity: u = (1, 0) on the whole top edge including its
// corners, u = 0 on the rest of the boundary. Q1 velocity, P0 pressure with
// local jump stabilization on 2x2 macroelements.
inline SaddleSystem assemble_stokes_q1p0(const UniformGrid &grid, const StokesOptions &options = {})
{
    const std::size_t n = grid.elements_per_side();
    if (n % 2 != 0) {
        throw std::invalid_argument("macroelement stabilization needs an even number of elements per side");
    }
    const double h = grid.spacing();
    const std::size_t nv = grid.num_interior();
    const std::size_t np = grid.num_elements();

    auto lid = [&](std::size_t, std::size_t j, int comp) { return (j == n && comp == 0) ? 1.0 : 0.0; };

    std::vector<Triplet> a_entries, b_entries;
    std::vector<double> rhs(2 * nv + np, 0.0);

    for (std::size_t ej = 0; ej < n; ++ej) {
        for (std::size_t ei = 0; ei < n; ++ei) {
            const auto nodes = grid.element_nodes(ei, ej);
            const std::size_t e = ej * n + ei;
            for (int a = 0; a < 4; ++a) {
                const auto [ia, ja] = nodes[a];
                const bool a_bdry = grid.is_boundary(ia, ja);
                // B = -int psi_e div(phi): corner derivative integrals are +-h/2.
                for (int comp = 0; comp < 2; ++comp) {
                    const double bval = -detail::q1_corner_sign[a][comp] * 0.5 * h;
                    if (a_bdry) {
                        rhs[2 * nv + e] -= bval * lid(ia, ja, comp);
                    } else {
                        b_entries.push_back({e, comp * nv + grid.interior_index(ia, ja), bval});
                    }
                }
                if (a_bdry) {
                    continue;
                }
                const std::size_t row = grid.interior_index(ia, ja);
                for (int b = 0; b < 4; ++b) {
                    const auto [ib, jb] = nodes[b];
                    const double k = detail::q1_stiffness(a, b);
                    for (int comp = 0; comp < 2; ++comp) {
                        if (grid.is_boundary(ib, jb)) {
                            rhs[comp * nv + row] -= k * lid(ib, jb, comp);
                        } else {
                            a_entries.push_back({comp * nv + row, comp * nv + grid.interior_index(ib, jb), k});
                        }
                    }
                }
            }
        }
    }

    // Jump stabilization: within each 2x2 macroelement, every element couples
    // to its two edge neighbours (cyclic order ll, lr, ur, ul).
    std::vector<Triplet> c_entries;
    const double scale = options.stabilization_beta * h * h;
    for (std::size_t mj = 0; mj < n; mj += 2) {
        for (std::size_t mi = 0; mi < n; mi += 2) {
            const std::array<std::size_t, 4> el{mj * n + mi, mj * n + mi + 1, (mj + 1) * n + mi + 1,
                                                (mj + 1) * n + mi};
            for (int a = 0; a < 4; ++a) {
                c_entries.push_back({el[a], el[a], 2 * scale});
                c_entries.push_back({el[a], el[(a + 1) % 4], -scale});
                c_entries.push_back({el[a], el[(a + 3) % 4], -scale});
            }
        }
    }

    SaddleSystem sys;
    sys.velocity_laplacian = CsrMatrix::from_triplets(2 * nv, 2 * nv, std::move(a_entries));
    sys.divergence = CsrMatrix::from_triplets(np, 2 * nv, std::move(b_entries));
    sys.stabilization = CsrMatrix::from_triplets(np, np, std::move(c_entries));
    sys.rhs = std::move(rhs);
    sys.velocity_block = nv;
    sys.num_pressure = np;
    return sys;
}

// Diagonal of the P0 pressure mass matrix: the element areas.
inline std::vector<double> pressure_mass_diag(const UniformGrid &grid)
{
    const double h = grid.spacing();
    return std::vector<double>(grid.num_elements(), h * h);
}

} // namespace fmmpc

#endif
