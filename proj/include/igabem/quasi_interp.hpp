#ifndef IGABEM_QUASI_INTERP_HPP
#define IGABEM_QUASI_INTERP_HPP

#include <optional>

#include "igabem/splines.hpp"

namespace igabem {

/// Uniform quasi-interpolation space of degree p on [lo, hi]: n+1 nodes at the
/// breakpoints of an open knot vector with simple interior knots.
struct QISpace {
    double lo = 0.0;
    double hi = 1.0;
    int degree = 2;     // p
    int intervals = 4;  // n >= p

    QISpace(double lo_, double hi_, int p, int n);
    double spacing() const { return (hi - lo) / intervals; }
    Vector nodes() const;
    KnotVector knots() const;
};

/// Matrix mapping the n+1 node values of g to the n+p spline coefficients of
/// the quasi-interpolant. Derivative-free: derivative data is replaced by
/// finite differences of order >= p on the nodes.
Matrix qi_coefficient_matrix(const QISpace& space);

/// Coefficients of the quasi-interpolant from node values alone.
Vector qi_coefficients(const QISpace& space, const Vector& values);

/// Hermite variant for p = 2 with exact derivative values at the nodes; other
/// degrees fall back to the derivative-free scheme.
Vector qi_coefficients(const QISpace& space, const Vector& values, const Vector& derivatives);

/// The quasi-interpolant itself, as a spline.
SplineFunction qi_spline(const QISpace& space, const Vector& values);

struct QIRule {
    QISpace space;
    Vector weights;  // n+1 entries; weights.dot(node values) approximates the integral
    double apply(const Vector& values) const { return weights.dot(values); }
};

/// Quadrature rule integrating the quasi-interpolant exactly.
QIRule qi_quadrature(const QISpace& space);

/// Least-squares convergence order from (mesh size, error) pairs; empty when
/// the errors sit at rounding level and the fit is meaningless.
std::optional<double> qi_error_bound_fit(std::span<const double> mesh_sizes,
                                         std::span<const double> errors);

}  // namespace igabem

#endif
