#ifndef IGABEM_SPLINES_HPP
#define IGABEM_SPLINES_HPP

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

namespace igabem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point2 = Eigen::Vector2d;

enum class KnotKind { open, periodic };

struct BreakpointPartition {
    std::vector<double> breakpoints;      // theta_1 < ... < theta_L, theta_1 = a, theta_L = b
    std::vector<int> multiplicities;      // interior multiplicities m_2 ... m_{L-1}
};

/// Knot sequence t_0 <= ... <= t_{N+d} defining N B-splines of degree d on [a, b],
/// with a = t_d and b = t_N. Open kind repeats the end knots d+1 times; periodic
/// kind requires the 2d leading knot differences to match the trailing ones.
class KnotVector {
public:
    KnotVector(std::vector<double> knots, int degree, KnotKind kind);

    static KnotVector open_uniform(double a, double b, int cells, int degree);
    static KnotVector periodic_uniform(double a, double b, int cells, int degree);

    int degree() const { return degree_; }
    KnotKind kind() const { return kind_; }
    /// Number of basis functions (unmerged).
    int count() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    /// Number of distinct shape functions: N - d for periodic, N otherwise.
    int merged_count() const;
    double a() const { return knots_[degree_]; }
    double b() const { return knots_[count()]; }
    double span_length() const { return b() - a(); }
    double knot(int i) const { return knots_[i]; }
    std::span<const double> knots() const { return knots_; }

    /// Tolerance for knot coincidence: 1e-14 * (b - a).
    double coincidence_tol() const { return 1e-14 * span_length(); }

    /// Index k with knot(k) <= t < knot(k+1); t = b maps to the last nonempty span.
    int find_span(double t) const;
    /// Maps t into [a, b) for periodic vectors; open vectors return t unchanged.
    double wrap(double t) const;

    BreakpointPartition breakpoints() const;
    double greville(int i) const;

    bool same_domain(const KnotVector& other) const;

private:
    std::vector<double> knots_;
    int degree_;
    KnotKind kind_;
};

/// Values of the d+1 B-splines that are nonzero on span k, at parameter t.
void basis_funs(const KnotVector& kv, int span, double t, double* out);

/// Rows 0..nder of derivatives of the d+1 nonzero B-splines on span k at t.
Matrix basis_ders(const KnotVector& kv, int span, double t, int nder);

/// B_{i,d}(t) by the Cox-de Boor recursion. For periodic vectors the merged
/// pair {B_i, B_{N-d+i}} is evaluated as the sum of both members.
double eval_basis(const KnotVector& kv, int i, double t);

/// Single unmerged B-spline value.
double eval_basis_raw(const KnotVector& kv, int i, double t);

/// k-th derivative of the unmerged B-spline B_{i,d} at t.
double eval_basis_der_raw(const KnotVector& kv, int i, double t, int order);

/// Definite integral of B_{i,d}: support length / (d+1).
double integrate_basis(const KnotVector& kv, int i);

/// Value of the single B-spline defined by the given d+2 knots (degree
/// knots.size()-2), by the Cox-de Boor recursion with the 0/0 := 0 convention.
double bspline_value_local(std::span<const double> knots, double t);

/// order-th derivative of the same local B-spline.
double bspline_derivative_local(std::span<const double> knots, double t, int order);

/// Planar B-spline curve in B-form, F(t) = sum_i d_i B_{i,d}(t).
class SplineCurve {
public:
    SplineCurve(KnotVector kv, Eigen::Matrix2Xd control_points);

    const KnotVector& knots() const { return kv_; }
    const Eigen::Matrix2Xd& control_points() const { return ctrl_; }
    bool closed() const { return kv_.kind() == KnotKind::periodic; }
    double a() const { return kv_.a(); }
    double b() const { return kv_.b(); }

    Point2 point(double t) const;
    /// order-th derivative (order 0 gives the point).
    Point2 derivative(double t, int order) const;
    /// J(t) = ||F'(t)||. Throws if below the 1e-12 regularity tolerance.
    double parametric_speed(double t) const;
    /// Outward-normal-consistent signed curvature; sign from orientation().
    double curvature(double t) const;
    /// Unit normal sigma * (y', -x') / J with sigma = orientation().
    Point2 normal(double t) const;
    /// +1 for counterclockwise closed curves, -1 for clockwise; +1 for open.
    double orientation() const { return orientation_; }

private:
    KnotVector kv_;
    Eigen::Matrix2Xd ctrl_;
    double orientation_ = 1.0;
};

/// Scalar spline, sum_i c_i B_{i,d}(t).
class SplineFunction {
public:
    SplineFunction(KnotVector kv, Vector coefficients);

    const KnotVector& knots() const { return kv_; }
    const Vector& coefficients() const { return coeffs_; }
    double value(double t) const;
    double derivative(double t, int order) const;
    /// Derivatives 0..nder at t, written to out.
    void derivatives(double t, int nder, double* out) const;

private:
    KnotVector kv_;
    Vector coeffs_;
};

/// B-spline coefficients of f in the space over kv, via de Boor-Fix dual
/// functionals. The evaluator must fill ders[0..nder] with f and derivatives.
Vector deboor_fix_coefficients(
    const KnotVector& kv,
    const std::function<void(double t, int nder, double* ders)>& evaluate);

/// Knot vector of the product space: breakpoint union, degree sum, and at each
/// breakpoint multiplicity (p+d) - min over factors of the local smoothness.
KnotVector product_knot_vector(const KnotVector& f, const KnotVector& g);

/// Exact product f*g expressed in the product space.
SplineFunction spline_product(const SplineFunction& f, const SplineFunction& g);

/// Boehm single knot insertion.
SplineFunction insert_knot(const SplineFunction& f, double u);

/// Piecewise Bernstein form of a spline: one row of D+1 coefficients per
/// nonempty span.
struct BezierSegments {
    std::vector<double> breaks;           // S+1 breakpoints
    std::vector<Eigen::VectorXd> coeffs;  // S rows, each D+1 Bernstein coefficients
    int degree = 0;
};
BezierSegments to_bezier(const SplineFunction& f);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace igabem

#endif
