#include "igabem/quasi_interp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace igabem {

QISpace::QISpace(double lo_, double hi_, int p, int n)
    : lo(lo_), hi(hi_), degree(p), intervals(n) {
    if (!(lo < hi)) throw std::invalid_argument("QISpace: empty interval");
    if (p < 1) throw std::invalid_argument("QISpace: degree must be positive");
    if (n < p) throw std::invalid_argument("QISpace: need n >= p intervals");
}

Vector QISpace::nodes() const {
    Vector t(intervals + 1);
    for (int k = 0; k <= intervals; ++k)
        t[k] = k == intervals ? hi : lo + k * spacing();
    return t;
}

KnotVector QISpace::knots() const {
    return KnotVector::open_uniform(lo, hi, intervals, degree);
}

namespace {

// Finite-difference weights for g'(node k) on unit-spaced nodes, exact on
// polynomials of degree <= 2: centered interior, one-sided at the ends.
void fd_row_p2(int k, int n, Matrix& C, int row, double coeff) {
    if (k == 0) {
        C(row, 0) += coeff * (-1.5);
        C(row, 1) += coeff * 2.0;
        C(row, 2) += coeff * (-0.5);
    } else if (k == n) {
        C(row, n) += coeff * 1.5;
        C(row, n - 1) += coeff * (-2.0);
        C(row, n - 2) += coeff * 0.5;
    } else {
        C(row, k - 1) += coeff * (-0.5);
        C(row, k + 1) += coeff * 0.5;
    }
}

Matrix coefficient_matrix_p2(int n) {
    Matrix C = Matrix::Zero(n + 2, n + 1);
    C(0, 0) = 1.0;
    C(n + 1, n) = 1.0;
    // lambda_j = (g_{j+1} + g_{j+2})/2 - (h/4)(-g'_{j+1} + g'_{j+2}),
    // with j = -1..n-2 in the paper's numbering mapped to rows 1..n.
    for (int row = 1; row <= n; ++row) {
        const int k1 = row - 1, k2 = row;
        C(row, k1) += 0.5;
        C(row, k2) += 0.5;
        fd_row_p2(k1, n, C, row, 0.25);
        fd_row_p2(k2, n, C, row, -0.25);
    }
    return C;
}

// Elementary symmetric polynomials of the given arguments.
std::vector<double> elementary_symmetric(std::span<const double> args) {
    std::vector<double> e(args.size() + 1, 0.0);
    e[0] = 1.0;
    std::size_t m = 0;
    for (double x : args) {
        ++m;
        for (std::size_t j = m; j >= 1; --j) e[j] = e[j] + x * e[j - 1];
    }
    return e;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// General degree: each coefficient is the polar form of a local Lagrange
// interpolant through p+1 consecutive nodes, exact on polynomials of degree p.
Matrix coefficient_matrix_general(const QISpace& space) {
    const int p = space.degree, n = space.intervals;
    const KnotVector kv = space.knots();
    Matrix C = Matrix::Zero(n + p, n + 1);

    for (int j = 0; j < n + p; ++j) {
        double greville = 0.0;
        for (int m = 1; m <= p; ++m) greville += kv.knot(j + m);
        greville /= p;
        const double pos = (greville - space.lo) / space.spacing();
        // Round-half-even keeps the window choice mirror-symmetric.
        int k0 = static_cast<int>(std::nearbyint(pos - 0.5 * p));
        k0 = std::clamp(k0, 0, n - p);

        // Power-basis interpolation around the window center.
        const double xc = k0 + 0.5 * p;
        Matrix V(p + 1, p + 1);
        for (int r = 0; r <= p; ++r) {
            double pw = 1.0;
            for (int m = 0; m <= p; ++m) {
                V(r, m) = pw;
                pw *= (k0 + r) - xc;
            }
        }
        const Matrix Vinv = V.fullPivLu().inverse();

        std::vector<double> args(p);
        for (int m = 1; m <= p; ++m)
            args[m - 1] = (kv.knot(j + m) - space.lo) / space.spacing() - xc;
        const std::vector<double> sym = elementary_symmetric(args);

        // Polar form of x^m at the knot arguments: e_m(args) / binom(p, m).
        for (int r = 0; r <= p; ++r) {
            double w = 0.0;
            for (int m = 0; m <= p; ++m) w += Vinv(m, r) * sym[m] / binomial(p, m);
            C(j, k0 + r) = w;
        }
    }
    return C;
}

}  // namespace

Matrix qi_coefficient_matrix(const QISpace& space) {
    if (space.degree == 2) return coefficient_matrix_p2(space.intervals);
    return coefficient_matrix_general(space);
}

Vector qi_coefficients(const QISpace& space, const Vector& values) {
    if (values.size() != space.intervals + 1)
        throw std::invalid_argument("qi_coefficients: need n+1 node values");
    return qi_coefficient_matrix(space) * values;
}

Vector qi_coefficients(const QISpace& space, const Vector& values, const Vector& derivatives) {
    if (values.size() != space.intervals + 1 || derivatives.size() != values.size())
        throw std::invalid_argument("qi_coefficients: need n+1 values and derivatives");
    if (space.degree != 2) return qi_coefficients(space, values);
    const int n = space.intervals;
    const double h = space.spacing();
    Vector lambda(n + 2);
    lambda[0] = values[0];
    lambda[n + 1] = values[n];
    for (int row = 1; row <= n; ++row) {
        const int k1 = row - 1, k2 = row;
        lambda[row] = 0.5 * (values[k1] + values[k2]) -
                      0.25 * h * (-derivatives[k1] + derivatives[k2]);
    }
    return lambda;
}

SplineFunction qi_spline(const QISpace& space, const Vector& values) {
    return SplineFunction(space.knots(), qi_coefficients(space, values));
}

QIRule qi_quadrature(const QISpace& space) {
    const Matrix C = qi_coefficient_matrix(space);
    const KnotVector kv = space.knots();
    Vector integrals(kv.count());
    for (int j = 0; j < kv.count(); ++j) integrals[j] = integrate_basis(kv, j);
    return QIRule{space, C.transpose() * integrals};
}

std::optional<double> qi_error_bound_fit(std::span<const double> mesh_sizes,
                                         std::span<const double> errors) {
    if (mesh_sizes.size() != errors.size() || mesh_sizes.size() < 4)
        throw std::invalid_argument("qi_error_bound_fit: need at least 4 mesh sizes");
    for (double e : errors)
        if (e <= 1e3 * std::numeric_limits<double>::epsilon()) return std::nullopt;
    return fit_loglog_slope(mesh_sizes, errors);
}

}  // namespace igabem
