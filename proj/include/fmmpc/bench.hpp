#ifndef FMMPC_BENCH_HPP
#define FMMPC_BENCH_HPP

// Experiment drivers behind the benchmark CLI and the acceptance checks.
// Mesh sizes are given as levels: level l means the label h = 2^-l, i.e. 2^l
// Q1 elements per side of [-1,1]^2.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmmpc/fem.hpp>
#include <fmmpc/fmm.hpp>
#include <fmmpc/krylov.hpp>
#include <fmmpc/preconditioner.hpp>

namespace fmmpc::bench
{

enum class Pc { fmm, ic, jacobi, none, exact };

inline Pc parse_pc(const std::string &s)
{
    if (s == "fmm") return Pc::fmm;
    if (s == "ic") return Pc::ic;
    if (s == "jacobi") return Pc::jacobi;
    if (s == "none") return Pc::none;
    if (s == "exact") return Pc::exact;
    throw std::invalid_argument("unknown preconditioner: " + s);
}

inline std::string to_string(Pc pc)
{
    switch (pc) {
    case Pc::fmm: return "fmm";
    case Pc::ic: return "ic";
    case Pc::jacobi: return "jacobi";
    case Pc::none: return "none";
    case Pc::exact: return "exact";
    }
    return "?";
}

inline UniformGrid grid_for_level(int level)
{
    if (level < 1 || level > 12) {
        throw std::invalid_argument("mesh level out of range");
    }
    return UniformGrid(std::size_t{1} << level);
}

inline double label_for_level(int level) { return std::ldexp(1.0, -level); }

// Accepts "2^-6", "0.015625" or "1/64"; the value must be a power of two.
inline int parse_level(const std::string &text)
{
    double h = 0;
    try {
        if (auto caret = text.find('^'); caret != std::string::npos) {
            h = std::pow(std::stod(text.substr(0, caret)), std::stod(text.substr(caret + 1)));
        } else if (auto slash = text.find('/'); slash != std::string::npos) {
            h = std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
        } else {
            h = std::stod(text);
        }
    } catch (const std::logic_error &) {
        throw std::invalid_argument("cannot parse mesh size: " + text);
    }
    if (!(h > 0) || h >= 1) {
        throw std::invalid_argument("mesh size must lie in (0, 1): " + text);
    }
    const double l = -std::log2(h);
    const double r = std::round(l);
    if (std::abs(l - r) > 1e-9) {
        throw std::invalid_argument("mesh size must be a power of two: " + text);
    }
    return static_cast<int>(r);
}

struct SolverSettings {
    PreconditionerOptions precond{};
    double tol = 1e-6;
    int maxit = 20;
    int repeats = 3; // timings report the minimum over repeats
};

// ---------------------------------------------------------------------------
// Tabular output

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream &os) const
    {
        auto line = [&os](const std::vector<std::string> &cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                os << (i ? "," : "") << cells[i];
            }
            os << '\n';
        };
        line(header);
        for (const auto &r : rows) {
            line(r);
        }
    }

    void write_markdown(std::ostream &os) const
    {
        std::vector<std::size_t> width(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) {
            width[c] = header[c].size();
            for (const auto &r : rows) {
                width[c] = std::max(width[c], r[c].size());
            }
        }
        auto line = [&](const std::vector<std::string> &cells) {
            os << '|';
            for (std::size_t c = 0; c < cells.size(); ++c) {
                os << ' ' << std::setw(static_cast<int>(width[c])) << cells[c] << " |";
            }
            os << '\n';
        };
        line(header);
        os << '|';
        for (auto w : width) {
            os << std::string(w + 2, '-') << '|';
        }
        os << '\n';
        for (const auto &r : rows) {
            line(r);
        }
    }
};

inline std::string fmt(double v, int digits = 6)
{
    std::ostringstream ss;
    ss << std::setprecision(digits) << v;
    return ss.str();
}

inline std::string fmt_h(int level) { return "2^-" + std::to_string(level); }

// ---------------------------------------------------------------------------
// Poisson

struct PoissonRow {
    PoissonProblemId problem{};
    int level = 0;
    Pc pc{};
    int order = 0;
    double theta = 0;
    int iterations = 0; // -1 when not converged
    bool converged = false;
    double final_relres = 0;
    double setup_s = 0;
    double apply_s = 0;
    double total_s = 0;
    std::vector<double> history;
};

namespace detail
{

struct BuiltPc {
    LinearOperator op;
    double setup_s = 0;
};

inline BuiltPc build_pc(Pc pc, const CsrMatrix &A, const UniformGrid &grid, const PreconditionerOptions &opts)
{
    const auto t0 = std::chrono::steady_clock::now();
    BuiltPc out;
    switch (pc) {
    case Pc::fmm: out.op = as_operator(PrecondContext::setup(grid, opts)); break;
    case Pc::ic: out.op = ic0(A); break;
    case Pc::jacobi: out.op = jacobi(A); break;
    case Pc::none: out.op = LinearOperator::identity(A.rows()); break;
    case Pc::exact: out.op = exact_solve(A); break;
    }
    out.setup_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace detail

inline PoissonRow run_poisson(PoissonProblemId problem, int level, Pc pc, const SolverSettings &s)
{
    const auto grid = grid_for_level(level);
    const auto sys = assemble_poisson_q1(make_poisson_problem(problem), grid);
    const auto A = LinearOperator::from_matrix(sys.matrix);
    PoissonRow row;
    row.problem = problem;
    row.level = level;
    row.pc = pc;
    row.order = s.precond.fmm.order;
    row.theta = s.precond.fmm.theta;
    row.setup_s = row.apply_s = row.total_s = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < std::max(1, s.repeats); ++rep) {
        const auto built = detail::build_pc(pc, sys.matrix, grid, s.precond);
        const auto res = pcg(A, built.op, sys.rhs, s.tol, s.maxit);
        row.setup_s = std::min(row.setup_s, built.setup_s);
        row.apply_s = std::min(row.apply_s, res.report.apply_time);
        row.total_s = std::min(row.total_s, built.setup_s + res.report.total_time);
        row.converged = res.report.converged;
        row.iterations = res.report.converged ? res.report.iterations : -1;
        row.final_relres = res.report.final_relres();
        row.history = res.report.residual_history;
    }
    return row;
}

inline Table poisson_table(const std::vector<PoissonRow> &rows)
{
    Table t{{"experiment", "problem", "h", "pc", "order", "theta", "iterations", "converged", "final_relres", "setup_s",
             "apply_s", "total_s"},
            {}};
    for (const auto &r : rows) {
        t.rows.push_back({"poisson", to_string(r.problem), fmt_h(r.level), to_string(r.pc), std::to_string(r.order),
                          fmt(r.theta), std::to_string(r.iterations), r.converged ? "true" : "false",
                          fmt(r.final_relres, 3), fmt(r.setup_s, 4), fmt(r.apply_s, 4), fmt(r.total_s, 4)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Stokes

struct StokesRow {
    int level = 0;
    Pc pc{};
    int iterations = 0; // -1 when not converged
    bool converged = false;
    double final_relres = 0;
    double setup_s = 0;
    double apply_s = 0;
    double total_s = 0;
};

// blockdiag(P_A, P_A, P_S) for the given saddle system.
inline LinearOperator saddle_preconditioner(const SaddleSystem &sys, LinearOperator velocity, LinearOperator pressure)
{
    if (velocity.size() != sys.velocity_block || pressure.size() != sys.num_pressure) {
        throw std::invalid_argument("dimension mismatch between preconditioner blocks and saddle system");
    }
    return block_diag(std::move(velocity), std::move(pressure), 2);
}

inline StokesRow run_stokes(int level, Pc velocity_pc, const SolverSettings &s, const StokesOptions &stokes = {})
{
    const auto grid = grid_for_level(level);
    const auto sys = assemble_stokes_q1p0(grid, stokes);
    const LinearOperator A(sys.size(), [&sys](std::span<const double> x, std::span<double> y) { sys.apply(x, y); });
    const CsrMatrix a1 = sys.velocity_laplacian.block(0, 0, sys.velocity_block, sys.velocity_block);
    StokesRow row{level, velocity_pc};
    row.setup_s = row.apply_s = row.total_s = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < std::max(1, s.repeats); ++rep) {
        const auto built = detail::build_pc(velocity_pc, a1, grid, s.precond);
        const auto P = saddle_preconditioner(sys, built.op, diagonal_inverse(pressure_mass_diag(grid)));
        const auto res = minres(A, P, sys.rhs, s.tol, s.maxit);
        row.setup_s = std::min(row.setup_s, built.setup_s);
        row.apply_s = std::min(row.apply_s, res.report.apply_time);
        row.total_s = std::min(row.total_s, built.setup_s + res.report.total_time);
        row.converged = res.report.converged;
        row.iterations = res.report.converged ? res.report.iterations : -1;
        row.final_relres = res.report.final_relres();
    }
    return row;
}

inline Table stokes_table(const std::vector<StokesRow> &rows)
{
    Table t{{"experiment", "h", "pc", "iterations", "converged", "final_relres", "setup_s", "apply_s", "total_s"}, {}};
    for (const auto &r : rows) {
        t.rows.push_back({"stokes", fmt_h(r.level), to_string(r.pc), std::to_string(r.iterations),
                          r.converged ? "true" : "false", fmt(r.final_relres, 3), fmt(r.setup_s, 4),
                          fmt(r.apply_s, 4), fmt(r.total_s, 4)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Spectra

struct EigRow {
    int level = 0;
    EigEstimate a;
    EigEstimate pa;
};

inline EigRow run_eigs(int level, const PreconditionerOptions &opts, Pc pc = Pc::fmm, int steps_a = 300,
                       int steps_pa = 40)
{
    const auto grid = grid_for_level(level);
    const auto sys = assemble_poisson_q1(make_poisson_problem(PoissonProblemId::p1), grid);
    const auto A = LinearOperator::from_matrix(sys.matrix);
    const auto P = detail::build_pc(pc, sys.matrix, grid, opts).op;
    return {level, lanczos_extreme_eigs(A, nullptr, steps_a), lanczos_extreme_eigs(A, &P, steps_pa)};
}

inline Table eigs_table(const std::vector<EigRow> &rows)
{
    Table t{{"experiment", "h", "lambda_min_A", "lambda_max_A", "kappa_A", "lambda_min_PA", "lambda_max_PA",
             "kappa_PA"},
            {}};
    for (const auto &r : rows) {
        t.rows.push_back({"eigs", fmt_h(r.level), fmt(r.a.lambda_min, 4), fmt(r.a.lambda_max, 4), fmt(r.a.kappa, 4),
                          fmt(r.pa.lambda_min, 4), fmt(r.pa.lambda_max, 4), fmt(r.pa.kappa, 4)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// FMM accuracy and complexity

inline std::vector<SourcePoint> random_sources(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    std::uniform_real_distribution<double> str(0.0, 1.0);
    std::vector<SourcePoint> s(n);
    for (auto &p : s) {
        p.position = {pos(rng), pos(rng)};
        p.strength = str(rng);
    }
    return s;
}

inline std::vector<Point2> random_points(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    std::vector<Point2> p(n);
    for (auto &x : p) {
        x = {pos(rng), pos(rng)};
    }
    return p;
}

inline double relative_l2(std::span<const double> approx, std::span<const double> exact)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
        den += exact[i] * exact[i];
    }
    return std::sqrt(num / den);
}

struct AccuracyRow {
    std::size_t n = 0;
    int order = 0;
    double theta = 0;
    double epsilon = 0;
    bool self = false;
    double rel_l2 = 0;
    double fmm_s = 0;
    double direct_s = 0;
};

// N random sources against N independent random targets, or against
// themselves when `self` is set (then epsilon must be positive).
inline AccuracyRow run_fmm_accuracy(std::size_t n, const FmmConfig &config, std::uint64_t seed, bool self = false)
{
    const auto sources = random_sources(n, seed);
    std::vector<Point2> targets;
    if (self) {
        for (const auto &s : sources) {
            targets.push_back(s.position);
        }
    } else {
        targets = random_points(n, seed ^ 0x9e3779b97f4a7c15ULL);
    }
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const auto fast = self ? fmm_evaluate(sources, config) : fmm_evaluate(sources, targets, config);
    const double fmm_s = std::chrono::duration<double>(clock::now() - t0).count();
    t0 = clock::now();
    const auto ref = direct_evaluate(sources, targets, config.epsilon);
    const double direct_s = std::chrono::duration<double>(clock::now() - t0).count();
    return {n, config.order, config.theta, config.epsilon, self, relative_l2(fast, ref), fmm_s, direct_s};
}

inline Table accuracy_table(const std::vector<AccuracyRow> &rows)
{
    Table t{{"experiment", "n", "order", "theta", "epsilon", "self", "rel_l2", "fmm_s", "direct_s"}, {}};
    for (const auto &r : rows) {
        t.rows.push_back({"fmm-accuracy", std::to_string(r.n), std::to_string(r.order), fmt(r.theta),
                          fmt(r.epsilon), r.self ? "true" : "false", fmt(r.rel_l2, 3), fmt(r.fmm_s, 4),
                          fmt(r.direct_s, 4)});
    }
    return t;
}

struct ComplexityRow {
    std::size_t n = 0;
    double setup_s = 0; // tree build and traversal
    double apply_s = 0; // one evaluation
    double total_s = 0;
    double ratio = 0;   // total_s over the previous row's total_s
};

// Tree build, traversal and one evaluation for N sources against N independent
// targets; the minimum over repeats is kept.
inline std::vector<ComplexityRow> run_complexity(const std::vector<std::size_t> &sizes, const FmmConfig &config,
                                                 int repeats = 3, std::uint64_t seed = 2024)
{
    using clock = std::chrono::steady_clock;
    std::vector<ComplexityRow> rows;
    for (std::size_t n : sizes) {
        const auto src = random_sources(n, seed);
        const auto targets = random_points(n, seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<Point2> pos(n);
        std::vector<double> f(n);
        for (std::size_t j = 0; j < n; ++j) {
            pos[j] = src[j].position;
            f[j] = src[j].strength;
        }
        ComplexityRow row{n, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(), 0};
        for (int rep = 0; rep < std::max(1, repeats); ++rep) {
            const auto t0 = clock::now();
            const FmmEvaluator ev(pos, targets, config);
            const auto t1 = clock::now();
            const auto u = ev.evaluate(f);
            const auto t2 = clock::now();
            (void)u;
            const double setup = std::chrono::duration<double>(t1 - t0).count();
            const double apply = std::chrono::duration<double>(t2 - t1).count();
            row.setup_s = std::min(row.setup_s, setup);
            row.apply_s = std::min(row.apply_s, apply);
            row.total_s = std::min(row.total_s, setup + apply);
        }
        row.ratio = rows.empty() ? 0.0 : row.total_s / rows.back().total_s;
        rows.push_back(row);
    }
    return rows;
}

inline Table complexity_table(const std::vector<ComplexityRow> &rows)
{
    Table t{{"experiment", "n", "setup_s", "apply_s", "total_s", "ratio"}, {}};
    for (const auto &r : rows) {
        t.rows.push_back({"complexity", std::to_string(r.n), fmt(r.setup_s, 4), fmt(r.apply_s, 4), fmt(r.total_s, 4),
                          fmt(r.ratio, 3)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Discretization error of FEM and BEM against an analytic solution

struct DiscretizationRow {
    int level = 0;
    double fem_error = 0; // relative discrete L2 over the interior nodes
    double bem_error = 0;
};

inline DiscretizationRow run_discretization(PoissonProblemId problem, int level, const PreconditionerOptions &opts)
{
    const auto prob = make_poisson_problem(problem);
    if (!prob.exact) {
        throw std::invalid_argument("problem has no analytic solution: " + to_string(problem));
    }
    const auto grid = grid_for_level(level);
    const auto sys = assemble_poisson_q1(prob, grid);
    const auto u_fem = exact_solve(sys.matrix)(sys.rhs);

    const auto nodes = grid.interior_nodes();
    std::vector<double> f(nodes.size()), exact(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        f[i] = prob.forcing(nodes[i]);
        exact[i] = (*prob.exact)(nodes[i]);
    }
    const auto g = boundary_values(build_boundary_mesh(grid.elements_per_side()), prob.boundary);
    FmmConfig config = opts.fmm;
    config.epsilon = opts.epsilon_scale * grid.spacing();
    const auto u_bem = bem_poisson_solve(f, g, grid, config, Evaluation::fmm, opts.quadrature);
    return {level, relative_l2(u_fem, exact), relative_l2(u_bem, exact)};
}

// Least-squares slope of log(error) against log(h).
inline double convergence_slope(const std::vector<int> &levels, const std::vector<double> &errors)
{
    const std::size_t n = levels.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(label_for_level(levels[i]));
        const double y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

inline Table discretization_table(PoissonProblemId problem, const std::vector<DiscretizationRow> &rows)
{
    Table t{{"experiment", "problem", "h", "fem_error", "bem_error"}, {}};
    for (const auto &r : rows) {
        t.rows.push_back({"discretization", to_string(problem), fmt_h(r.level), fmt(r.fem_error, 4),
                          fmt(r.bem_error, 4)});
    }
    return t;
}

} // namespace fmmpc::bench

#endif
