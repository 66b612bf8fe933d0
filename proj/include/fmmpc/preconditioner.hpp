#ifndef FMMPC_PRECONDITIONER_HPP
#define FMMPC_PRECONDITIONER_HPP

// BEM Poisson solve used as an approximate inverse of the interior Q1
// stiffness matrix. A residual r on the interior nodes becomes the forcing
// f = r / h^2, the boundary data is zero, and the BEM solution at the nodes
// is returned.

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmmpc/bem.hpp>
#include <fmmpc/fem.hpp>
#include <fmmpc/fmm.hpp>
#include <fmmpc/krylov.hpp>

namespace fmmpc
{

struct PreconditionerOptions {
    FmmConfig fmm{};            // epsilon is overwritten from epsilon_scale
    double epsilon_scale = 0.1; // smoothing length in units of the grid spacing
    int quadrature = default_bem_quadrature;
};

class PrecondContext
{
public:
    static std::shared_ptr<const PrecondContext> setup(const UniformGrid &grid, const PreconditionerOptions &options)
    {
        return std::shared_ptr<const PrecondContext>(new PrecondContext(grid, options));
    }

    std::size_t size() const { return m_num_interior; }
    std::size_t num_boundary() const { return m_ops.size(); }
    const BemOperators &operators() const { return m_ops; }
    const FmmConfig &fmm_config() const { return m_config; }
    double setup_time() const { return m_setup_time; }

    void apply(std::span<const double> r, std::span<double> z) const
    {
        if (r.size() != m_num_interior || z.size() != m_num_interior) {
            throw std::invalid_argument("preconditioner size mismatch");
        }
        // f_j w_j = (r_j / h^2) h^2 = r_j
        const auto vol = m_volume.evaluate(r);
        std::vector<double> rhs(num_boundary());
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            rhs[i] = -vol[m_num_interior + i];
        }
        const auto flux = m_ops.solve(rhs);
        const auto single = m_single_layer.evaluate(flux);
        for (std::size_t i = 0; i < m_num_interior; ++i) {
            z[i] = vol[i] + single[i];
        }
    }

    std::vector<double> apply(std::span<const double> r) const
    {
        std::vector<double> z(m_num_interior);
        apply(r, z);
        return z;
    }

private:
    // Volume targets are the interior nodes followed by the boundary midpoints.
    static std::vector<Point2> volume_targets(const UniformGrid &grid, const BoundaryMesh &mesh)
    {
        auto pts = grid.interior_nodes();
        const auto mid = mesh.midpoints();
        pts.insert(pts.end(), mid.begin(), mid.end());
        return pts;
    }

    static FmmConfig smoothed(FmmConfig c, const UniformGrid &grid, double scale)
    {
        if (!(scale >= 0)) {
            throw std::invalid_argument("epsilon scale must be non-negative");
        }
        c.epsilon = scale * grid.spacing();
        return c;
    }

    PrecondContext(const UniformGrid &grid, const PreconditionerOptions &options)
        : PrecondContext(grid, options, std::chrono::steady_clock::now(),
                         build_boundary_mesh(grid.elements_per_side()))
    {
    }

    PrecondContext(const UniformGrid &grid, const PreconditionerOptions &options,
                   std::chrono::steady_clock::time_point t0, const BoundaryMesh &mesh)
        : m_num_interior(nonempty_interior(grid)), m_config(smoothed(options.fmm, grid, options.epsilon_scale)),
          m_ops(assemble_bem(mesh, options.quadrature)),
          m_volume(grid.interior_nodes(), volume_targets(grid, mesh), m_config),
          m_single_layer(mesh, grid.interior_nodes(), m_config, options.quadrature)
    {
        m_setup_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    static std::size_t nonempty_interior(const UniformGrid &grid)
    {
        if (grid.num_interior() == 0) {
            throw std::invalid_argument("grid has no interior nodes");
        }
        return grid.num_interior();
    }

    std::size_t m_num_interior;
    FmmConfig m_config;
    BemOperators m_ops;
    FmmEvaluator m_volume;
    SingleLayerFmm m_single_layer;
    double m_setup_time = 0;
};

inline LinearOperator as_operator(std::shared_ptr<const PrecondContext> ctx)
{
    const std::size_t n = ctx->size();
    return {n, [ctx = std::move(ctx)](std::span<const double> r, std::span<double> z) { ctx->apply(r, z); }};
}

} // namespace fmmpc

#endif
