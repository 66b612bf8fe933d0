#ifndef FMMPC_BEM_HPP
#define FMMPC_BEM_HPP

// Constant-element collocation BEM for -lap u = f on the square [-1,1]^2 with
// Dirichlet data. Unknowns are the normal fluxes at element midpoints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <fmmpc/fem.hpp>
#include <fmmpc/fmm.hpp>
#include <fmmpc/geometry.hpp>
#include <fmmpc/sparse.hpp>

namespace fmmpc
{

struct BoundaryElement {
    Point2 a;
    Point2 b;
    Point2 midpoint;
    Point2 normal; // unit, outward
    double length = 0;
};

struct BoundaryMesh {
    std::vector<BoundaryElement> elements; // counterclockwise around the square

    std::size_t size() const { return elements.size(); }

    std::vector<Point2> midpoints() const
    {
        std::vector<Point2> out;
        out.reserve(elements.size());
        for (const auto &e : elements) {
            out.push_back(e.midpoint);
        }
        return out;
    }

    double total_length() const
    {
        double s = 0;
        for (const auto &e : elements) {
            s += e.length;
        }
        return s;
    }
};

inline BoundaryElement make_boundary_element(Point2 a, Point2 b)
{
    const Point2 d = b - a;
    const double len = norm(d);
    if (!(len > 0)) {
        throw std::invalid_argument("degenerate boundary element");
    }
    // For a counterclockwise traversal the outward normal is the tangent turned clockwise.
    return {a, b, 0.5 * (a + b), Point2{d.y / len, -d.x / len}, len};
}

inline BoundaryMesh build_boundary_mesh(std::size_t n_per_side)
{
    if (n_per_side == 0) {
        throw std::invalid_argument("n_per_side must be positive");
    }
    const double n = static_cast<double>(n_per_side);
    auto lerp = [n](double from, double to, std::size_t k) {
        return k == 0 ? from : (static_cast<double>(k) == n ? to : from + (to - from) * static_cast<double>(k) / n);
    };
    const Point2 corners[5] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {-1, -1}};
    BoundaryMesh mesh;
    mesh.elements.reserve(4 * n_per_side);
    for (int side = 0; side < 4; ++side) {
        const Point2 p = corners[side];
        const Point2 q = corners[side + 1];
        for (std::size_t k = 0; k < n_per_side; ++k) {
            const Point2 a{lerp(p.x, q.x, k), lerp(p.y, q.y, k)};
            const Point2 b{lerp(p.x, q.x, k + 1), lerp(p.y, q.y, k + 1)};
            mesh.elements.push_back(make_boundary_element(a, b));
        }
    }
    return mesh;
}

// Gauss-Legendre rule mapped to [0, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int q)
{
    if (q < 1) {
        throw std::invalid_argument("quadrature order must be >= 1");
    }
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(q));
    rule.weights.resize(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
        double x = std::cos(pi * (i + 0.75) / (q + 0.5));
        double dp = 1;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        // x runs from near +1 downwards, so t = (1 - x) / 2 ascends.
        rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
        rule.weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

inline constexpr int default_bem_quadrature = 4;

namespace detail
{

// Entries with the target closer than this many element lengths use the
// closed-form segment integrals.
inline constexpr double near_factor = 2.0;

inline double segment_distance(const BoundaryElement &e, Point2 x)
{
    const Point2 d = e.b - e.a;
    const double t = std::clamp(dot(x - e.a, d) / dot(d, d), 0.0, 1.0);
    return distance(x, e.a + t * d);
}

inline bool is_near(const BoundaryElement &e, Point2 x) { return segment_distance(e, x) < near_factor * e.length; }

// Local frame: s0 is the tangential coordinate of x from endpoint a, h the
// signed normal offset (negative on the interior side).
inline void local_frame(const BoundaryElement &e, Point2 x, double &s0, double &h)
{
    const Point2 t = (1.0 / e.length) * (e.b - e.a);
    s0 = dot(x - e.a, t);
    h = dot(x - e.a, e.normal);
}

inline double single_layer_analytic(const BoundaryElement &e, Point2 x)
{
    double s0, h;
    local_frame(e, x, s0, h);
    // Antiderivative of (1/2) log(u^2 + h^2).
    auto F = [h](double u) {
        if (h == 0) {
            return u == 0 ? 0.0 : u * std::log(std::abs(u)) - u;
        }
        return 0.5 * (u * std::log(u * u + h * h) - 2.0 * u + 2.0 * h * std::atan(u / h));
    };
    return (-1.0 / (2.0 * pi)) * (F(e.length - s0) - F(-s0));
}

inline double double_layer_analytic(const BoundaryElement &e, Point2 x)
{
    double s0, h;
    local_frame(e, x, s0, h);
    if (h == 0) {
        return 0.0;
    }
    return (1.0 / (2.0 * pi)) * (std::atan((e.length - s0) / h) - std::atan(-s0 / h));
}

inline double single_layer_gauss(const BoundaryElement &e, Point2 x, const GaussRule &rule)
{
    double acc = 0;
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
        const Point2 y = e.a + rule.nodes[g] * (e.b - e.a);
        const Point2 d = x - y;
        acc += rule.weights[g] * std::log(dot(d, d));
    }
    return (-0.25 / pi) * e.length * acc;
}

inline double double_layer_gauss(const BoundaryElement &e, Point2 x, const GaussRule &rule)
{
    double acc = 0;
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
        const Point2 y = e.a + rule.nodes[g] * (e.b - e.a);
        const Point2 d = x - y;
        acc += rule.weights[g] * dot(d, e.normal) / dot(d, d);
    }
    return (0.5 / pi) * e.length * acc;
}

inline double single_layer(const BoundaryElement &e, Point2 x, const GaussRule &rule)
{
    return is_near(e, x) ? single_layer_analytic(e, x) : single_layer_gauss(e, x, rule);
}

inline double double_layer(const BoundaryElement &e, Point2 x, const GaussRule &rule)
{
    return is_near(e, x) ? double_layer_analytic(e, x) : double_layer_gauss(e, x, rule);
}

} // namespace detail

// Integral of G(x, y) = -(1/2 pi) log|x - y| over the element.
inline double single_layer_entry(const BoundaryElement &element, Point2 x, int q = default_bem_quadrature)
{
    return detail::single_layer(element, x, gauss_legendre(q));
}

// Integral of dG/dn_y over the element.
inline double double_layer_entry(const BoundaryElement &element, Point2 x, int q = default_bem_quadrature)
{
    return detail::double_layer(element, x, gauss_legendre(q));
}

// Interior FEM nodes acting as point sources of the volume integral.
struct VolumeSourceGrid {
    std::vector<Point2> nodes;
    std::vector<double> weights;
    std::vector<double> values;

    // Interior nodes of the grid with weight h^2 each.
    static VolumeSourceGrid on_grid(const UniformGrid &grid, std::vector<double> values)
    {
        if (values.size() != grid.num_interior()) {
            throw std::invalid_argument("volume values do not match the interior node count");
        }
        const double h = grid.spacing();
        VolumeSourceGrid v;
        v.nodes = grid.interior_nodes();
        v.weights.assign(v.nodes.size(), h * h);
        v.values = std::move(values);
        return v;
    }

    std::vector<SourcePoint> sources() const
    {
        std::vector<SourcePoint> s(nodes.size());
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            s[j] = {nodes[j], values[j] * weights[j]};
        }
        return s;
    }
};

enum class Evaluation { fmm, direct };

// sum_j f_j w_j G_eps(x_i, y_j)
inline std::vector<double> volume_potential(const VolumeSourceGrid &volume, std::span<const Point2> targets,
                                            const FmmConfig &config, Evaluation mode = Evaluation::fmm)
{
    if (volume.nodes.empty() || targets.empty()) {
        return std::vector<double>(targets.size(), 0.0);
    }
    const auto sources = volume.sources();
    return mode == Evaluation::fmm ? fmm_evaluate(sources, targets, config)
                                   : direct_evaluate(sources, targets, config.epsilon);
}

struct BemOperators {
    BoundaryMesh mesh;
    GaussRule rule;
    Eigen::MatrixXd g_bb; // single layer at the midpoints
    Eigen::MatrixXd h_bb; // I/2 + double layer at the midpoints
    Eigen::PartialPivLU<Eigen::MatrixXd> g_factor;

    std::size_t size() const { return mesh.size(); }

    // x = G_bb^{-1} rhs
    std::vector<double> solve(std::span<const double> rhs) const
    {
        if (rhs.size() != size()) {
            throw std::invalid_argument("boundary system size mismatch");
        }
        const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
        const Eigen::VectorXd x = g_factor.solve(b);
        return {x.data(), x.data() + x.size()};
    }
};

inline BemOperators assemble_bem(const BoundaryMesh &mesh, int q = default_bem_quadrature)
{
    if (mesh.size() == 0) {
        throw std::invalid_argument("empty boundary mesh");
    }
    BemOperators ops;
    ops.mesh = mesh;
    ops.rule = gauss_legendre(q);
    const auto n = static_cast<Eigen::Index>(mesh.size());
    ops.g_bb.resize(n, n);
    ops.h_bb.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point2 x = mesh.elements[static_cast<std::size_t>(i)].midpoint;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto &e = mesh.elements[static_cast<std::size_t>(j)];
            ops.g_bb(i, j) = detail::single_layer(e, x, ops.rule);
            ops.h_bb(i, j) = detail::double_layer(e, x, ops.rule) + (i == j ? 0.5 : 0.0);
        }
    }
    ops.g_factor.compute(ops.g_bb);
    if (!(ops.g_factor.rcond() > 1e-13)) {
        throw std::domain_error("degenerate boundary system");
    }
    return ops;
}

inline std::vector<double> boundary_values(const BoundaryMesh &mesh, const ScalarField &g)
{
    std::vector<double> out;
    out.reserve(mesh.size());
    for (const auto &e : mesh.elements) {
        out.push_back(g(e.midpoint));
    }
    return out;
}

// Solves G_bb flux = H_bb u_gamma - V with V the volume potential at the midpoints.
inline std::vector<double> solve_boundary_flux(const BemOperators &ops, std::span<const double> u_gamma,
                                               const VolumeSourceGrid &volume, const FmmConfig &config,
                                               Evaluation mode = Evaluation::fmm)
{
    if (u_gamma.size() != ops.size()) {
        throw std::invalid_argument("boundary data size mismatch");
    }
    const auto mid = ops.mesh.midpoints();
    std::vector<double> rhs = volume_potential(volume, mid, config, mode);
    const Eigen::Map<const Eigen::VectorXd> u(u_gamma.data(), static_cast<Eigen::Index>(u_gamma.size()));
    const Eigen::VectorXd hu = ops.h_bb * u;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs[i] = hu[static_cast<Eigen::Index>(i)] - rhs[i];
    }
    return ops.solve(rhs);
}

// u(x) = sum_e flux_e S_e(x) - sum_e u_e D_e(x) + volume potential.
inline std::vector<double> evaluate_interior(const BemOperators &ops, std::span<const double> u_gamma,
                                             std::span<const double> flux, const VolumeSourceGrid &volume,
                                             std::span<const Point2> targets, const FmmConfig &config,
                                             Evaluation mode = Evaluation::fmm)
{
    if (u_gamma.size() != ops.size() || flux.size() != ops.size()) {
        throw std::invalid_argument("boundary data size mismatch");
    }
    std::vector<double> u = volume_potential(volume, targets, config, mode);
    const bool has_dirichlet = std::any_of(u_gamma.begin(), u_gamma.end(), [](double v) { return v != 0; });
    for (std::size_t i = 0; i < targets.size(); ++i) {
        double acc = 0;
        for (std::size_t e = 0; e < ops.size(); ++e) {
            const auto &el = ops.mesh.elements[e];
            acc += flux[e] * detail::single_layer(el, targets[i], ops.rule);
            if (has_dirichlet) {
                acc -= u_gamma[e] * detail::double_layer(el, targets[i], ops.rule);
            }
        }
        u[i] += acc;
    }
    return u;
}

// Full solve on the grid: forcing at interior nodes, Dirichlet data at the
// boundary midpoints (one element per FEM boundary edge). Returns u at the
// interior nodes.
inline std::vector<double> bem_poisson_solve(std::span<const double> f, std::span<const double> g,
                                             const UniformGrid &grid, const FmmConfig &config,
                                             Evaluation mode = Evaluation::fmm, int q = default_bem_quadrature)
{
    const auto ops = assemble_bem(build_boundary_mesh(grid.elements_per_side()), q);
    const auto volume = VolumeSourceGrid::on_grid(grid, std::vector<double>(f.begin(), f.end()));
    const auto flux = solve_boundary_flux(ops, g, volume, config, mode);
    const auto nodes = grid.interior_nodes();
    return evaluate_interior(ops, g, flux, volume, nodes, config, mode);
}

// Single-layer potential of a piecewise constant density at fixed targets,
// with the far field from an FMM over the boundary Gauss points and a sparse
// correction that swaps in the closed-form integral for near pairs.
class SingleLayerFmm
{
public:
    SingleLayerFmm(const BoundaryMesh &mesh, std::span<const Point2> targets, FmmConfig config,
                   int q = default_bem_quadrature)
        : SingleLayerFmm(mesh, targets, unsmoothed(config), gauss_legendre(q))
    {
    }

    std::size_t num_targets() const { return m_num_targets; }

    std::vector<double> evaluate(std::span<const double> density) const
    {
        if (density.size() != m_num_elements) {
            throw std::invalid_argument("density size mismatch");
        }
        std::vector<double> strengths(m_point_weight.size());
        for (std::size_t k = 0; k < strengths.size(); ++k) {
            strengths[k] = density[k / m_q] * m_point_weight[k];
        }
        auto u = m_fmm.evaluate(strengths);
        std::vector<double> corr(m_num_targets);
        m_correction.multiply(density, corr);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += corr[i];
        }
        return u;
    }

private:
    static FmmConfig unsmoothed(FmmConfig c)
    {
        c.epsilon = 0;
        return c;
    }

    static std::vector<Point2> gauss_points(const BoundaryMesh &mesh, const GaussRule &rule)
    {
        std::vector<Point2> pts;
        pts.reserve(mesh.size() * rule.nodes.size());
        for (const auto &e : mesh.elements) {
            for (double t : rule.nodes) {
                pts.push_back(e.a + t * (e.b - e.a));
            }
        }
        return pts;
    }

    SingleLayerFmm(const BoundaryMesh &mesh, std::span<const Point2> targets, const FmmConfig &config,
                   const GaussRule &rule)
        : m_fmm(gauss_points(mesh, rule), targets, config), m_q(rule.nodes.size()), m_num_elements(mesh.size()),
          m_num_targets(targets.size())
    {
        m_point_weight.reserve(mesh.size() * m_q);
        double max_len = 0;
        for (const auto &e : mesh.elements) {
            max_len = std::max(max_len, e.length);
            for (double w : rule.weights) {
                m_point_weight.push_back(w * e.length);
            }
        }
        // Only targets this close to the outer square can be near an element.
        const double reach = detail::near_factor * max_len;
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const Point2 x = targets[i];
            if (std::min(1.0 - std::abs(x.x), 1.0 - std::abs(x.y)) >= reach) {
                continue;
            }
            for (std::size_t e = 0; e < mesh.size(); ++e) {
                const auto &el = mesh.elements[e];
                if (detail::is_near(el, x)) {
                    t.push_back(
                        {i, e, detail::single_layer_analytic(el, x) - detail::single_layer_gauss(el, x, rule)});
                }
            }
        }
        m_correction = CsrMatrix::from_triplets(targets.size(), mesh.size(), std::move(t));
    }

    FmmEvaluator m_fmm;
    std::size_t m_q;
    std::size_t m_num_elements;
    std::size_t m_num_targets;
    std::vector<double> m_point_weight;
    CsrMatrix m_correction;
};

} // namespace fmmpc

#endif
