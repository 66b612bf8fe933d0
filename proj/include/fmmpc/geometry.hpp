#ifndef FMMPC_GEOMETRY_HPP
#define FMMPC_GEOMETRY_HPP

#include <cmath>
#include <complex>
#include <numbers>

namespace fmmpc
{

using complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

struct Point2 {
    double x = 0;
    double y = 0;

    friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point2, Point2) = default;
};

inline constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline complex to_complex(Point2 p) { return {p.x, p.y}; }

// A point charge: position plus strength f_j.
struct SourcePoint {
    Point2 position;
    double strength = 0;
};

// Smoothed 2-D Laplace kernel -(1/2pi) log sqrt(r^2 + eps^2), taking squared quantities.
inline double laplace_kernel(double r2, double eps2) { return (-0.25 / pi) * std::log(r2 + eps2); }

} // namespace fmmpc

#endif
