#ifndef FMMPC_KERNELS_HPP
#define FMMPC_KERNELS_HPP

// Complex-variable expansion kernels for the 2-D Laplace potential.
//
// A multipole expansion about z_c with coefficients M_0..M_{p-1} represents
//     sum_j f_j log(z - z_j)  ~=  M_0 log(z - z_c) + sum_{n>=1} M_n / (z - z_c)^n
// and a local expansion about z_c represents the same quantity as the
// polynomial sum_n L_n (z - z_c)^n. The physical potential is -1/(2 pi) times
// the real part; that factor is applied by the evaluator, not here.
//
// Shifts follow the naming z_ab = z_a - z_b: P2M takes the source offsets
// z_{mu j}, M2M the shift z_{M mu} = parent - child, M2L the separation
// z_{Lambda M} = local center - multipole center, L2L the shift
// z_{lambda Lambda} = child - parent and L2P the offset z_{i lambda}.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmmpc/geometry.hpp>

namespace fmmpc
{

struct FmmConfig {
    int order = 6;       // number of expansion terms p
    double theta = 0.4;  // multipole acceptance parameter
    std::size_t ncrit = 16;
    double epsilon = 0;  // kernel smoothing, near field only

    void validate() const
    {
        if (order < 1) {
            throw std::invalid_argument("expansion order must be >= 1");
        }
        if (!(theta > 0 && theta < 1)) {
            throw std::invalid_argument("theta must lie in (0, 1)");
        }
        if (ncrit == 0) {
            throw std::invalid_argument("ncrit must be positive");
        }
        if (!(epsilon >= 0)) {
            throw std::invalid_argument("epsilon must be non-negative");
        }
    }
};

using MultipoleCoeffs = std::vector<complex>;
using LocalCoeffs = std::vector<complex>;

// ---------------------------------------------------------------------------
// P2P

// Accumulates u_i += sum_j f_j G_eps(x_i, y_j) over the given ranges.
// Summation runs left to right over sources for every target.
inline void p2p_accumulate(std::span<const complex> targets, std::span<double> potentials,
                           std::span<const complex> sources, std::span<const double> strengths, double epsilon)
{
    const double eps2 = epsilon * epsilon;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double tx = targets[i].real();
        const double ty = targets[i].imag();
        double acc = 0;
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const double dx = tx - sources[j].real();
            const double dy = ty - sources[j].imag();
            const double r2 = dx * dx + dy * dy + eps2;
            if (r2 == 0) {
                throw std::domain_error("singular evaluation");
            }
            acc += strengths[j] * std::log(r2);
        }
        potentials[i] += (-0.25 / pi) * acc;
    }
}

inline std::vector<double> p2p(std::span<const Point2> targets, std::span<const SourcePoint> sources, double epsilon)
{
    if (!(epsilon >= 0)) {
        throw std::invalid_argument("epsilon must be non-negative");
    }
    std::vector<complex> tz(targets.size()), sz(sources.size());
    std::vector<double> f(sources.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        tz[i] = to_complex(targets[i]);
    }
    for (std::size_t j = 0; j < sources.size(); ++j) {
        sz[j] = to_complex(sources[j].position);
        f[j] = sources[j].strength;
    }
    std::vector<double> u(targets.size(), 0.0);
    p2p_accumulate(tz, u, sz, f, epsilon);
    return u;
}

// ---------------------------------------------------------------------------
// P2M, M2M, M2L, L2L, L2P. All accumulate into their output span.

inline void p2m_accumulate(std::span<const complex> sources, std::span<const double> strengths, complex center,
                           std::span<complex> multipole)
{
    const std::size_t p = multipole.size();
    for (std::size_t j = 0; j < sources.size(); ++j) {
        const double f = strengths[j];
        multipole[0] += f;
        // (-z_{mu j})^n = (z_j - z_mu)^n
        const complex w = sources[j] - center;
        complex power = 1;
        for (std::size_t n = 1; n < p; ++n) {
            power *= w;
            multipole[n] -= f * power / static_cast<double>(n);
        }
    }
}

inline MultipoleCoeffs p2m(std::span<const SourcePoint> sources, complex center, int p)
{
    if (p < 1) {
        throw std::invalid_argument("expansion order must be >= 1");
    }
    std::vector<complex> z(sources.size());
    std::vector<double> f(sources.size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        z[j] = to_complex(sources[j].position);
        f[j] = sources[j].strength;
    }
    MultipoleCoeffs m(static_cast<std::size_t>(p), complex{0, 0});
    p2m_accumulate(z, f, center, m);
    return m;
}

inline void m2m_accumulate(std::span<const complex> child, complex shift, std::span<complex> parent)
{
    const std::size_t p = child.size();
    const complex mz = -shift;
    parent[0] += child[0];
    complex mz_n = 1; // (-z)^n
    for (std::size_t n = 1; n < p; ++n) {
        mz_n *= mz;
        complex acc = -child[0] * mz_n / static_cast<double>(n);
        // k = n .. 1: powers (-z)^{n-k} grow and C(n-1, k-1) follows C(n-1, m) with m = n-k.
        complex power = 1;
        double binom = 1;
        for (std::size_t k = n; k >= 1; --k) {
            acc += child[k] * power * binom;
            const std::size_t m = n - k; // current binomial is C(n-1, m)
            power *= mz;
            binom = binom * static_cast<double>(n - 1 - m) / static_cast<double>(m + 1);
        }
        parent[n] += acc;
    }
}

inline MultipoleCoeffs m2m(std::span<const complex> child, complex shift)
{
    MultipoleCoeffs out(child.size(), complex{0, 0});
    m2m_accumulate(child, shift, out);
    return out;
}

inline void m2l_accumulate(std::span<const complex> multipole, complex separation, std::span<complex> local)
{
    if (separation == complex{0, 0}) {
        throw std::domain_error("M2L at zero distance");
    }
    const std::size_t p = multipole.size();
    const complex inv = 1.0 / separation;

    complex l0 = multipole[0] * std::log(separation);
    complex inv_k = 1;
    for (std::size_t k = 1; k < p; ++k) {
        inv_k *= inv;
        l0 += multipole[k] * inv_k;
    }
    local[0] += l0;

    complex inv_n = 1; // 1 / z^n
    double sign = 1;   // (-1)^n
    for (std::size_t n = 1; n < p; ++n) {
        inv_n *= inv;
        sign = -sign;
        // -M_0 / ((-z)^n n) = -M_0 (-1)^n / (z^n n)
        complex acc = -multipole[0] * sign * inv_n / static_cast<double>(n);
        complex inv_nk = inv_n; // 1 / z^{n+k}
        double binom = 1;       // C(n+k-1, k-1), starting at k = 1
        for (std::size_t k = 1; k < p; ++k) {
            inv_nk *= inv;
            acc += sign * multipole[k] * inv_nk * binom;
            binom = binom * static_cast<double>(n + k) / static_cast<double>(k);
        }
        local[n] += acc;
    }
}

inline LocalCoeffs m2l(std::span<const complex> multipole, complex separation)
{
    LocalCoeffs out(multipole.size(), complex{0, 0});
    m2l_accumulate(multipole, separation, out);
    return out;
}

inline void l2l_accumulate(std::span<const complex> parent, complex shift, std::span<complex> child)
{
    const std::size_t p = parent.size();
    for (std::size_t n = 0; n < p; ++n) {
        complex acc = 0;
        complex power = 1; // z^{k-n}
        double binom = 1;  // C(k, n)
        for (std::size_t k = n; k < p; ++k) {
            acc += parent[k] * power * binom;
            power *= shift;
            binom = binom * static_cast<double>(k + 1) / static_cast<double>(k + 1 - n);
        }
        child[n] += acc;
    }
}

inline LocalCoeffs l2l(std::span<const complex> parent, complex shift)
{
    LocalCoeffs out(parent.size(), complex{0, 0});
    l2l_accumulate(parent, shift, out);
    return out;
}

// Re(sum_n L_n z^n), evaluated by Horner's rule.
inline double l2p(std::span<const complex> local, complex offset)
{
    complex acc = 0;
    for (std::size_t n = local.size(); n-- > 0;) {
        acc = acc * offset + local[n];
    }
    return acc.real();
}

// Re(M_0 log z + sum_n M_n / z^n) for an offset z from the multipole center.
inline double evaluate_multipole(std::span<const complex> multipole, complex offset)
{
    complex acc = multipole[0] * std::log(offset);
    const complex inv = 1.0 / offset;
    complex inv_n = 1;
    for (std::size_t n = 1; n < multipole.size(); ++n) {
        inv_n *= inv;
        acc += multipole[n] * inv_n;
    }
    return acc.real();
}

// Multiplier turning the real part of the log series into the Laplace potential.
inline constexpr double potential_scale = -1.0 / (2.0 * pi);

} // namespace fmmpc

#endif
