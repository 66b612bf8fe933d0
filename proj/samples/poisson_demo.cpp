// Solves -lap u = 1 on [-1,1]^2 with u = 0 on the boundary, preconditioning
// CG with the FMM-BEM solve and with IC(0).
//
//   poisson_demo [level]

#include <cstdio>
#include <cstdlib>

#include <fmmpc/fmmpc.hpp>

int main(int argc, char **argv)
{
    using namespace fmmpc;
    const int level = argc > 1 ? std::atoi(argv[1]) : 6;
    const auto grid = bench::grid_for_level(level);
    const auto sys = assemble_poisson_q1(make_poisson_problem(PoissonProblemId::p1), grid);
    const auto A = LinearOperator::from_matrix(sys.matrix);

    const auto ctx = PrecondContext::setup(grid, PreconditionerOptions{});
    const auto fmm = pcg(A, as_operator(ctx), sys.rhs, 1e-6, 50);
    const auto ic = pcg(A, ic0(sys.matrix), sys.rhs, 1e-6, 500);

    std::printf("grid %zux%zu, %zu unknowns, %zu boundary elements\n", grid.elements_per_side(),
                grid.elements_per_side(), ctx->size(), ctx->num_boundary());
    std::printf("fmm-bem: %d iterations, setup %.3f s, solve %.3f s\n", fmm.report.iterations, ctx->setup_time(),
                fmm.report.total_time);
    std::printf("ic(0):   %d iterations, solve %.3f s\n", ic.report.iterations, ic.report.total_time);
    for (std::size_t k = 0; k < fmm.report.residual_history.size(); ++k) {
        std::printf("  %2zu  %.3e\n", k, fmm.report.residual_history[k]);
    }

    // u(0,0) sits at the grid centre
    const std::size_t c = grid.elements_per_side() / 2;
    std::printf("u(0,0) = %.6f\n", fmm.x[grid.interior_index(c, c)]);
    return fmm.report.converged ? 0 : 1;
}
