#include "igabem/splines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "igabem/gauss.hpp"

namespace igabem {

namespace {
constexpr int kMaxDegree = 10;
}

KnotVector::KnotVector(std::vector<double> knots, int degree, KnotKind kind)
    : knots_(std::move(knots)), degree_(degree), kind_(kind) {
    if (degree_ < 0 || degree_ > kMaxDegree)
        throw std::invalid_argument("KnotVector: unsupported degree");
    const int n = count();
    if (n < degree_ + 1)
        throw std::invalid_argument("KnotVector: too few knots");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
        if (knots_[i] > knots_[i + 1])
            throw std::invalid_argument("KnotVector: knots must be non-decreasing");
    if (!(a() < b()))
        throw std::invalid_argument("KnotVector: empty parametric domain");

    // Interior multiplicities must not exceed degree + 1.
    const double tol = coincidence_tol();
    int run = 1;
    for (int i = degree_ + 1; i <= n; ++i) {
        if (i > degree_ + 1 && knots_[i] - knots_[i - 1] <= tol)
            ++run;
        else
            run = 1;
        if (run > degree_ + 1)
            throw std::invalid_argument("KnotVector: interior multiplicity exceeds degree+1");
    }

    if (kind_ == KnotKind::periodic) {
        const int shift = n - degree_;
        if (shift < 1 || 2 * degree_ + shift > n + degree_)
            throw std::invalid_argument("KnotVector: too short for periodic kind");
        for (int i = 0; i < 2 * degree_; ++i) {
            const double lhs = knots_[i + 1] - knots_[i];
            const double rhs = knots_[i + shift + 1] - knots_[i + shift];
            if (std::abs(lhs - rhs) > 1e-12 * span_length())
                throw std::invalid_argument("KnotVector: periodic knot differences mismatch");
        }
    }
}

KnotVector KnotVector::open_uniform(double a, double b, int cells, int degree) {
    if (cells < 1) throw std::invalid_argument("open_uniform: cells must be positive");
    std::vector<double> knots;
    knots.reserve(cells + 2 * degree + 1);
    for (int i = 0; i < degree; ++i) knots.push_back(a);
    const double h = (b - a) / cells;
    for (int i = 0; i <= cells; ++i) knots.push_back(i == cells ? b : a + i * h);
    for (int i = 0; i < degree; ++i) knots.push_back(b);
    return KnotVector(std::move(knots), degree, KnotKind::open);
}

KnotVector KnotVector::periodic_uniform(double a, double b, int cells, int degree) {
    if (cells < degree + 1)
        throw std::invalid_argument("periodic_uniform: need at least degree+1 cells");
    std::vector<double> knots;
    knots.reserve(cells + 2 * degree + 1);
    const double h = (b - a) / cells;
    for (int i = -degree; i <= cells + degree; ++i) knots.push_back(a + i * h);
    return KnotVector(std::move(knots), degree, KnotKind::periodic);
}

int KnotVector::merged_count() const {
    return kind_ == KnotKind::periodic ? count() - degree_ : count();
}

int KnotVector::find_span(double t) const {
    const int n = count();
    const double tol = 1e-12 * span_length();
    if (t < a() - tol || t > b() + tol)
        throw std::invalid_argument("KnotVector: parameter outside [a, b]");
    t = std::clamp(t, a(), b());
    if (t >= knots_[n]) {
        int k = n - 1;
        while (k > degree_ && knots_[k] >= knots_[n]) --k;
        return k;
    }
    auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, t);
    return static_cast<int>(it - knots_.begin()) - 1;
}

double KnotVector::wrap(double t) const {
    if (kind_ != KnotKind::periodic) return t;
    const double g = span_length();
    double u = t;
    while (u < a()) u += g;
    while (u >= b()) u -= g;
    return u;
}

BreakpointPartition KnotVector::breakpoints() const {
    BreakpointPartition part;
    const double tol = coincidence_tol();
    const int n = count();
    part.breakpoints.push_back(a());
    int mult = 0;
    for (int i = degree_ + 1; i < n; ++i) {
        if (knots_[i] - part.breakpoints.back() > tol) {
            if (part.breakpoints.size() > 1) part.multiplicities.push_back(mult);
            part.breakpoints.push_back(knots_[i]);
            mult = 1;
        } else if (part.breakpoints.size() > 1) {
            ++mult;
        } else {
            // knot coincides with a; fold into the left end
        }
    }
    if (part.breakpoints.size() > 1) part.multiplicities.push_back(mult);
    part.breakpoints.push_back(b());
    return part;
}

double KnotVector::greville(int i) const {
    double sum = 0.0;
    for (int m = 1; m <= degree_; ++m) sum += knots_[i + m];
    return degree_ > 0 ? sum / degree_ : 0.5 * (knots_[i] + knots_[i + 1]);
}

bool KnotVector::same_domain(const KnotVector& other) const {
    const double tol = std::max(coincidence_tol(), other.coincidence_tol());
    return std::abs(a() - other.a()) <= tol && std::abs(b() - other.b()) <= tol;
}

void basis_funs(const KnotVector& kv, int span, double t, double* out) {
    const int d = kv.degree();
    double left[kMaxDegree + 1], right[kMaxDegree + 1];
    out[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[j] = t - kv.knot(span + 1 - j);
        right[j] = kv.knot(span + j) - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double den = right[r + 1] + left[j - r];
            const double temp = den != 0.0 ? out[r] / den : 0.0;
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

Matrix basis_ders(const KnotVector& kv, int span, double t, int nder) {
    const int d = kv.degree();
    Matrix ders = Matrix::Zero(nder + 1, d + 1);
    Matrix ndu(d + 1, d + 1);
    double left[kMaxDegree + 1], right[kMaxDegree + 1];
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[j] = t - kv.knot(span + 1 - j);
        right[j] = kv.knot(span + j) - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(j, r) != 0.0 ? ndu(r, j - 1) / ndu(j, r) : 0.0;
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= d; ++j) ders(0, j) = ndu(j, d);

    const int kmax = std::min(nder, d);
    Matrix a(2, d + 1);
    for (int r = 0; r <= d; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= kmax; ++k) {
            double dval = 0.0;
            const int rk = r - k, pk = d - k;
            if (r >= k) {
                const double den = ndu(pk + 1, rk);
                a(s2, 0) = den != 0.0 ? a(s1, 0) / den : 0.0;
                dval = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = r - 1 <= pk ? k - 1 : d - r;
            for (int j = j1; j <= j2; ++j) {
                const double den = ndu(pk + 1, rk + j);
                a(s2, j) = den != 0.0 ? (a(s1, j) - a(s1, j - 1)) / den : 0.0;
                dval += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                const double den = ndu(pk + 1, r);
                a(s2, k) = den != 0.0 ? -a(s1, k - 1) / den : 0.0;
                dval += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = dval;
            std::swap(s1, s2);
        }
    }
    double factor = d;
    for (int k = 1; k <= kmax; ++k) {
        for (int j = 0; j <= d; ++j) ders(k, j) *= factor;
        factor *= d - k;
    }
    return ders;
}

double eval_basis_raw(const KnotVector& kv, int i, double t) {
    if (i < 0 || i >= kv.count())
        throw std::out_of_range("eval_basis: basis index out of range");
    const int d = kv.degree();
    const int span = kv.find_span(t);
    if (i < span - d || i > span) return 0.0;
    double vals[kMaxDegree + 1];
    basis_funs(kv, span, t, vals);
    return vals[i - (span - d)];
}

double eval_basis(const KnotVector& kv, int i, double t) {
    if (i < 0 || i >= kv.count())
        throw std::out_of_range("eval_basis: basis index out of range");
    if (kv.kind() != KnotKind::periodic) return eval_basis_raw(kv, i, t);
    const int d = kv.degree();
    const int shift = kv.count() - d;
    const int m = i % shift;
    double value = eval_basis_raw(kv, m, t);
    if (m < d) value += eval_basis_raw(kv, m + shift, t);
    return value;
}

double eval_basis_der_raw(const KnotVector& kv, int i, double t, int order) {
    if (i < 0 || i >= kv.count())
        throw std::out_of_range("eval_basis_der: basis index out of range");
    const int d = kv.degree();
    const int span = kv.find_span(t);
    if (i < span - d || i > span) return 0.0;
    Matrix ders = basis_ders(kv, span, t, order);
    return ders(order, i - (span - d));
}

double integrate_basis(const KnotVector& kv, int i) {
    if (i < 0 || i >= kv.count())
        throw std::out_of_range("integrate_basis: basis index out of range");
    const int d = kv.degree();
    return (kv.knot(i + d + 1) - kv.knot(i)) / (d + 1);
}

namespace {

double bspline_rec(const double* t, int i, int r, double x, int top_degree, double hi) {
    if (r == 0) {
        // Half-open spans, right-closed at the support end.
        if (t[i] <= x && x < t[i + 1]) return 1.0;
        if (x == hi && t[i] < t[i + 1] && t[i + 1] == hi) return 1.0;
        return 0.0;
    }
    double v = 0.0;
    const double d1 = t[i + r] - t[i];
    if (d1 > 0.0) v += (x - t[i]) / d1 * bspline_rec(t, i, r - 1, x, top_degree, hi);
    const double d2 = t[i + r + 1] - t[i + 1];
    if (d2 > 0.0) v += (t[i + r + 1] - x) / d2 * bspline_rec(t, i + 1, r - 1, x, top_degree, hi);
    return v;
}

double bspline_der_rec(const double* t, int i, int r, double x, int order, int top, double hi) {
    if (order == 0) return bspline_rec(t, i, r, x, top, hi);
    if (r == 0) return 0.0;
    double v = 0.0;
    const double d1 = t[i + r] - t[i];
    if (d1 > 0.0) v += r / d1 * bspline_der_rec(t, i, r - 1, x, order - 1, top, hi);
    const double d2 = t[i + r + 1] - t[i + 1];
    if (d2 > 0.0) v -= r / d2 * bspline_der_rec(t, i + 1, r - 1, x, order - 1, top, hi);
    return v;
}

}  // namespace

double bspline_value_local(std::span<const double> knots, double t) {
    const int d = static_cast<int>(knots.size()) - 2;
    if (t < knots.front() || t > knots.back()) return 0.0;
    return bspline_rec(knots.data(), 0, d, t, d, knots.back());
}

double bspline_derivative_local(std::span<const double> knots, double t, int order) {
    const int d = static_cast<int>(knots.size()) - 2;
    if (t < knots.front() || t > knots.back()) return 0.0;
    return bspline_der_rec(knots.data(), 0, d, t, order, d, knots.back());
}

SplineCurve::SplineCurve(KnotVector kv, Eigen::Matrix2Xd control_points)
    : kv_(std::move(kv)), ctrl_(std::move(control_points)) {
    if (ctrl_.cols() != kv_.count())
        throw std::invalid_argument("SplineCurve: control point count must equal basis dimension");
    const int d = kv_.degree();
    if (kv_.kind() == KnotKind::periodic) {
        const int n = kv_.count();
        for (int i = 0; i < d; ++i)
            if ((ctrl_.col(i) - ctrl_.col(n - d + i)).norm() > 1e-12)
                throw std::invalid_argument(
                    "SplineCurve: periodic curve requires first d control points to equal last d");
    }

    // Regularity: J > 0 sampled on a fine grid.
    const auto part = kv_.breakpoints();
    for (std::size_t q = 0; q + 1 < part.breakpoints.size(); ++q) {
        const double lo = part.breakpoints[q], hi = part.breakpoints[q + 1];
        for (int s = 0; s <= 16; ++s) {
            const double t = lo + (hi - lo) * s / 16.0;
            if (derivative(t, 1).norm() <= 1e-12)
                throw std::invalid_argument("SplineCurve: degenerate parametrization (J ~ 0)");
        }
    }

    if (closed()) {
        // Signed area fixes the outward-normal orientation.
        double area2 = 0.0;
        for (std::size_t q = 0; q + 1 < part.breakpoints.size(); ++q)
            area2 += gauss_integrate(d + 2, part.breakpoints[q], part.breakpoints[q + 1],
                                     [&](double t) {
                                         const Point2 p = point(t);
                                         const Point2 v = derivative(t, 1);
                                         return p.x() * v.y() - p.y() * v.x();
                                     });
        orientation_ = area2 >= 0.0 ? 1.0 : -1.0;
    }
}

Point2 SplineCurve::point(double t) const {
    const double u = (t < kv_.a() || t > kv_.b()) ? kv_.wrap(t) : t;
    const int d = kv_.degree();
    const int span = kv_.find_span(u);
    double vals[kMaxDegree + 1];
    basis_funs(kv_, span, u, vals);
    Point2 p = Point2::Zero();
    for (int r = 0; r <= d; ++r) p += vals[r] * ctrl_.col(span - d + r);
    return p;
}

Point2 SplineCurve::derivative(double t, int order) const {
    if (order == 0) return point(t);
    const double u = (t < kv_.a() || t > kv_.b()) ? kv_.wrap(t) : t;
    const int d = kv_.degree();
    const int span = kv_.find_span(u);
    Matrix ders = basis_ders(kv_, span, u, order);
    Point2 p = Point2::Zero();
    for (int r = 0; r <= d; ++r) p += ders(order, r) * ctrl_.col(span - d + r);
    return p;
}

double SplineCurve::parametric_speed(double t) const {
    const double j = derivative(t, 1).norm();
    if (j <= 1e-12)
        throw std::runtime_error("SplineCurve: regularity violation, J below tolerance");
    return j;
}

double SplineCurve::curvature(double t) const {
    const Point2 v = derivative(t, 1);
    const Point2 w = derivative(t, 2);
    const double j = v.norm();
    return orientation_ * (v.x() * w.y() - v.y() * w.x()) / (j * j * j);
}

Point2 SplineCurve::normal(double t) const {
    const Point2 v = derivative(t, 1);
    return orientation_ * Point2(v.y(), -v.x()) / v.norm();
}

SplineFunction::SplineFunction(KnotVector kv, Vector coefficients)
    : kv_(std::move(kv)), coeffs_(std::move(coefficients)) {
    if (coeffs_.size() != kv_.count())
        throw std::invalid_argument("SplineFunction: coefficient count must equal basis dimension");
}

double SplineFunction::value(double t) const {
    const int d = kv_.degree();
    const int span = kv_.find_span(t);
    double vals[kMaxDegree + 1];
    basis_funs(kv_, span, t, vals);
    double s = 0.0;
    for (int r = 0; r <= d; ++r) s += vals[r] * coeffs_[span - d + r];
    return s;
}

double SplineFunction::derivative(double t, int order) const {
    if (order == 0) return value(t);
    const int d = kv_.degree();
    const int span = kv_.find_span(t);
    Matrix ders = basis_ders(kv_, span, t, order);
    double s = 0.0;
    for (int r = 0; r <= d; ++r) s += ders(order, r) * coeffs_[span - d + r];
    return s;
}

void SplineFunction::derivatives(double t, int nder, double* out) const {
    const int d = kv_.degree();
    const int span = kv_.find_span(t);
    Matrix ders = basis_ders(kv_, span, t, nder);
    for (int k = 0; k <= nder; ++k) {
        double s = 0.0;
        for (int r = 0; r <= d; ++r) s += ders(k, r) * coeffs_[span - d + r];
        out[k] = s;
    }
}

Vector deboor_fix_coefficients(
    const KnotVector& kv,
    const std::function<void(double t, int nder, double* ders)>& evaluate) {
    const int d = kv.degree();
    const int n = kv.count();
    Vector coeffs(n);
    std::vector<double> psi(d + 1), ders(d + 1);
    double dfact = 1.0;
    for (int m = 2; m <= d; ++m) dfact *= m;

    for (int k = 0; k < n; ++k) {
        // Widest nonempty span inside the support, midpoint as expansion point.
        double best_lo = kv.knot(k), best_hi = kv.knot(k);
        for (int m = k; m <= k + d; ++m) {
            if (kv.knot(m + 1) - kv.knot(m) > best_hi - best_lo) {
                best_lo = kv.knot(m);
                best_hi = kv.knot(m + 1);
            }
        }
        const double xi = 0.5 * (best_lo + best_hi);

        // psi(t) = prod_{m=1}^{d} (t - knot(k+m)) expanded in powers of (t - xi).
        std::fill(psi.begin(), psi.end(), 0.0);
        psi[0] = 1.0;
        for (int m = 1; m <= d; ++m) {
            const double c = xi - kv.knot(k + m);
            for (int j = m; j >= 1; --j) psi[j] = psi[j - 1] + c * psi[j];
            psi[0] *= c;
        }

        evaluate(xi, d, ders.data());
        double fact_dr = dfact;  // (d - r)!
        double sum = 0.0, sign = 1.0;
        for (int r = 0; r <= d; ++r) {
            sum += sign * fact_dr * psi[d - r] * ders[r];
            sign = -sign;
            if (r < d) fact_dr /= (d - r);
        }
        coeffs[k] = sum / dfact;
    }
    return coeffs;
}

namespace {

struct BreakInfo {
    double value;
    int smooth_f;  // local smoothness of factor f (large when not a breakpoint)
    int smooth_g;
};

int local_smoothness(const BreakpointPartition& part, int degree, double theta, double tol) {
    for (std::size_t q = 1; q + 1 < part.breakpoints.size(); ++q)
        if (std::abs(part.breakpoints[q] - theta) <= tol)
            return degree - part.multiplicities[q - 1];
    return std::numeric_limits<int>::max();
}

}  // namespace

KnotVector product_knot_vector(const KnotVector& f, const KnotVector& g) {
    if (!f.same_domain(g))
        throw std::invalid_argument("product_knot_vector: mismatched domains");
    const int D = f.degree() + g.degree();
    const double a = f.a(), b = f.b();
    const double tol = std::max(f.coincidence_tol(), g.coincidence_tol());

    const auto pf = f.breakpoints();
    const auto pg = g.breakpoints();
    std::vector<double> interior;
    for (std::size_t q = 1; q + 1 < pf.breakpoints.size(); ++q) interior.push_back(pf.breakpoints[q]);
    for (std::size_t q = 1; q + 1 < pg.breakpoints.size(); ++q) interior.push_back(pg.breakpoints[q]);
    std::sort(interior.begin(), interior.end());
    interior.erase(std::unique(interior.begin(), interior.end(),
                               [&](double x, double y) { return std::abs(x - y) <= tol; }),
                   interior.end());

    std::vector<double> knots;
    for (int i = 0; i <= D; ++i) knots.push_back(a);
    for (double theta : interior) {
        const int sf = local_smoothness(pf, f.degree(), theta, tol);
        const int sg = local_smoothness(pg, g.degree(), theta, tol);
        const int s = std::min(sf, sg);
        const int mult = std::clamp(D - s, 1, D + 1);
        for (int m = 0; m < mult; ++m) knots.push_back(theta);
    }
    for (int i = 0; i <= D; ++i) knots.push_back(b);
    return KnotVector(std::move(knots), D, KnotKind::open);
}

SplineFunction spline_product(const SplineFunction& f, const SplineFunction& g) {
    KnotVector pkv = product_knot_vector(f.knots(), g.knots());
    const int df = f.knots().degree(), dg = g.knots().degree();
    const int D = pkv.degree();
    Vector coeffs = deboor_fix_coefficients(pkv, [&](double t, int nder, double* out) {
        std::vector<double> fd(nder + 1, 0.0), gd(nder + 1, 0.0);
        f.derivatives(t, std::min(nder, df), fd.data());
        g.derivatives(t, std::min(nder, dg), gd.data());
        // Leibniz rule; derivatives beyond the factor degree vanish inside spans.
        for (int r = 0; r <= nder; ++r) {
            double sum = 0.0, binom = 1.0;
            for (int i = 0; i <= r; ++i) {
                if (i <= df && r - i <= dg) sum += binom * fd[i] * gd[r - i];
                binom = binom * (r - i) / (i + 1);
            }
            out[r] = sum;
        }
    });
    (void)D;
    return SplineFunction(std::move(pkv), std::move(coeffs));
}

SplineFunction insert_knot(const SplineFunction& f, double u) {
    const KnotVector& kv = f.knots();
    const int d = kv.degree();
    if (u <= kv.a() || u >= kv.b())
        throw std::invalid_argument("insert_knot: knot must be interior");
    const int k = kv.find_span(u);
    const int n = kv.count();

    std::vector<double> knots(kv.knots().begin(), kv.knots().end());
    knots.insert(knots.begin() + k + 1, u);
    Vector coeffs(n + 1);
    for (int i = 0; i <= k - d; ++i) coeffs[i] = f.coefficients()[i];
    for (int i = k + 1; i <= n; ++i) coeffs[i] = f.coefficients()[i - 1];
    for (int i = k - d + 1; i <= k; ++i) {
        const double den = kv.knot(i + d) - kv.knot(i);
        const double alpha = den > 0.0 ? (u - kv.knot(i)) / den : 0.0;
        coeffs[i] = alpha * f.coefficients()[i] + (1.0 - alpha) * f.coefficients()[i - 1];
    }
    return SplineFunction(KnotVector(std::move(knots), d, kv.kind()), std::move(coeffs));
}

BezierSegments to_bezier(const SplineFunction& f) {
    const int D = f.knots().degree();
    SplineFunction work = f;
    bool done = false;
    while (!done) {
        done = true;
        const auto part = work.knots().breakpoints();
        for (std::size_t q = 1; q + 1 < part.breakpoints.size(); ++q) {
            if (part.multiplicities[q - 1] < D) {
                work = insert_knot(work, part.breakpoints[q]);
                done = false;
                break;
            }
        }
    }
    const auto part = work.knots().breakpoints();
    BezierSegments seg;
    seg.degree = D;
    seg.breaks = part.breakpoints;
    const int nspan = static_cast<int>(part.breakpoints.size()) - 1;
    for (int q = 0; q < nspan; ++q) {
        Eigen::VectorXd row(D + 1);
        for (int j = 0; j <= D; ++j) row[j] = work.coefficients()[q * D + j];
        seg.coeffs.push_back(std::move(row));
    }
    return seg;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_loglog_slope: need at least two samples");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0)
            throw std::invalid_argument("fit_loglog_slope: samples must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace igabem
