#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "igabem/splines.hpp"
#include "oracles.hpp"

using namespace igabem;

namespace {

SplineCurve slit_curve() {
    // Quadratic B-form of the segment [-1,1] x {0}.
    KnotVector kv({0, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1}, 2, KnotKind::open);
    Eigen::Matrix2Xd ctrl(2, 7);
    ctrl << -1.0, -0.8, -0.4, 0.0, 0.4, 0.8, 1.0,
             0.0,  0.0,  0.0, 0.0, 0.0, 0.0, 0.0;
    return SplineCurve(std::move(kv), std::move(ctrl));
}

SplineCurve polygon_curve(int sides, double radius, int degree) {
    KnotVector kv = KnotVector::periodic_uniform(0.0, 1.0, sides, degree);
    Eigen::Matrix2Xd ctrl(2, kv.count());
    for (int i = 0; i < kv.count(); ++i) {
        const double phi = 2.0 * M_PI * i / sides;
        ctrl.col(i) = radius * Point2(std::cos(phi), std::sin(phi));
    }
    return SplineCurve(std::move(kv), std::move(ctrl));
}

}  // namespace

TEST_CASE("knot vector invariants are enforced") {
    CHECK_THROWS(KnotVector({0, 0, 0, 1, 0.5, 1, 1}, 2, KnotKind::open));  // not sorted
    CHECK_THROWS(KnotVector({0, 0, 0, 0.5, 0.5, 0.5, 0.5, 1, 1, 1}, 2,
                            KnotKind::open));  // multiplicity 4 > d+1
    CHECK_THROWS(KnotVector({0, 0, 0, 0, 0, 0}, 2, KnotKind::open));       // empty domain
    CHECK_THROWS(KnotVector({-0.2, 0, 0, 0.5, 1, 1, 1.3}, 2, KnotKind::periodic));

    const KnotVector kv = KnotVector::open_uniform(0.0, 1.0, 5, 2);
    CHECK(kv.count() == 7);
    CHECK(kv.a() == 0.0);
    CHECK(kv.b() == 1.0);
    const auto part = kv.breakpoints();
    CHECK(part.breakpoints.size() == 6);
    // dimension identity N = d + 1 + sum of interior multiplicities
    int msum = 0;
    for (int m : part.multiplicities) msum += m;
    CHECK(kv.count() == kv.degree() + 1 + msum);

    const KnotVector pkv = KnotVector::periodic_uniform(-1.0, 1.0, 12, 3);
    CHECK(pkv.count() == 15);
    CHECK(pkv.merged_count() == 12);
}

TEST_CASE("central value of the quadratic cardinal B-spline") {
    const double knots[] = {0, 1, 2, 3};
    CHECK(bspline_value_local(knots, 1.5) == doctest::Approx(0.75).epsilon(1e-14));
    // Same function embedded in a periodic space.
    const KnotVector kv = KnotVector::periodic_uniform(0.0, 5.0, 5, 2);
    int idx = -1;
    for (int i = 0; i < kv.count(); ++i)
        if (kv.knot(i) == 0.0 && kv.knot(i + 3) == 3.0) idx = i;
    REQUIRE(idx >= 0);
    CHECK(eval_basis_raw(kv, idx, 1.5) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("evaluation matches the literal Cox-de Boor recursion") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const KnotVector kvs[] = {
        KnotVector::open_uniform(0.0, 1.0, 5, 2),
        KnotVector::open_uniform(-1.0, 1.0, 4, 3),
        KnotVector({0, 0, 0, 0.25, 0.25, 0.7, 1, 1, 1}, 2, KnotKind::open),
        KnotVector::periodic_uniform(0.0, 1.0, 6, 2),
    };
    for (const auto& kv : kvs) {
        for (int trial = 0; trial < 200; ++trial) {
            const double t = kv.a() + (kv.b() - kv.a()) * uni(rng);
            for (int i = 0; i < kv.count(); ++i) {
                CHECK(eval_basis_raw(kv, i, t) ==
                      doctest::Approx(oracles::naive_basis(kv, i, t)).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("partition of unity, non-negativity, local support") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const KnotVector kvs[] = {
        KnotVector::open_uniform(0.0, 1.0, 5, 2),
        KnotVector({0, 0, 0, 0, 0.3, 0.3, 0.6, 1, 1, 1, 1}, 3, KnotKind::open),
        KnotVector::periodic_uniform(-1.0, 1.0, 8, 3),
    };
    for (const auto& kv : kvs) {
        for (int trial = 0; trial < 1000; ++trial) {
            const double t = kv.a() + (kv.b() - kv.a()) * uni(rng);
            double sum = 0.0;
            for (int i = 0; i < kv.count(); ++i) {
                const double v = eval_basis_raw(kv, i, t);
                CHECK(v >= 0.0);
                sum += v;
                const bool outside = t < kv.knot(i) || t > kv.knot(i + kv.degree() + 1);
                if (outside) CHECK(v == 0.0);
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("merged periodic pair sums both members and preserves unity") {
    const KnotVector kv = KnotVector::periodic_uniform(0.0, 1.0, 6, 2);
    const int shift = kv.count() - kv.degree();
    for (double t : {0.0, 0.05, 0.37, 0.92, 1.0}) {
        for (int i = 0; i < kv.degree(); ++i)
            CHECK(eval_basis(kv, i, t) ==
                  doctest::Approx(eval_basis_raw(kv, i, t) + eval_basis_raw(kv, i + shift, t))
                      .epsilon(1e-15));
        double sum = 0.0;
        for (int m = 0; m < kv.merged_count(); ++m) sum += eval_basis(kv, m, t);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS(eval_basis(kv, -1, 0.5));
    CHECK_THROWS(eval_basis(kv, kv.count(), 0.5));
    CHECK_THROWS(eval_basis(kv, 0, 2.0));
}

TEST_CASE("slit geometry interpolates its ends and has constant speed 2") {
    const SplineCurve c = slit_curve();
    CHECK((c.point(0.0) - Point2(-1, 0)).norm() < 1e-15);
    CHECK((c.point(0.5) - Point2(0, 0)).norm() < 1e-14);
    CHECK((c.point(1.0) - Point2(1, 0)).norm() < 1e-15);
    for (double t : {0.0, 0.1, 0.33, 0.5, 0.77, 1.0})
        CHECK(c.parametric_speed(t) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("closed curves: endpoint match, periodic compatibility, speed oracle") {
    const SplineCurve c = polygon_curve(8, 1.0, 3);
    CHECK((c.point(0.0) - c.point(1.0)).norm() < 1e-13);
    CHECK((c.derivative(0.0, 1) - c.derivative(1.0, 1)).norm() < 1e-12);

    // Finite-difference oracle for the parametric speed.
    for (double t : {0.12, 0.5, 0.81}) {
        const double eps = 1e-6;
        const Point2 fd = (c.point(t + eps) - c.point(t - eps)) / (2 * eps);
        CHECK(c.parametric_speed(t) == doctest::Approx(fd.norm()).epsilon(1e-8));
    }

    // Arc-fraction parametrization of a polygon has constant speed = perimeter.
    const SplineCurve poly = polygon_curve(12, 0.7, 1);
    const double side = 2.0 * 0.7 * std::sin(M_PI / 12);
    for (double t : {0.03, 0.4, 0.62, 0.99})
        CHECK(poly.parametric_speed(t) == doctest::Approx(12 * side).epsilon(1e-12));

    CHECK(c.orientation() == 1.0);  // counterclockwise control polygon
    // Outward normal on a counterclockwise convex curve points away from 0.
    for (double t : {0.1, 0.45, 0.8})
        CHECK(c.normal(t).dot(c.point(t)) > 0.0);
}

TEST_CASE("degenerate curves are rejected") {
    KnotVector kv = KnotVector::open_uniform(0.0, 1.0, 2, 1);
    Eigen::Matrix2Xd ctrl(2, 3);
    ctrl << 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0;
    CHECK_THROWS(SplineCurve(std::move(kv), std::move(ctrl)));
}

TEST_CASE("integrate_basis equals the support-length formula and a Gauss oracle") {
    const KnotVector kvs[] = {
        KnotVector::open_uniform(0.0, 1.0, 5, 2),
        KnotVector::open_uniform(0.0, 2.0, 4, 3),
        KnotVector({0, 0, 0, 0.25, 0.25, 0.7, 1, 1, 1}, 2, KnotKind::open),
    };
    for (const auto& kv : kvs) {
        const int d = kv.degree();
        for (int i = 0; i < kv.count(); ++i) {
            const double closed_form = (kv.knot(i + d + 1) - kv.knot(i)) / (d + 1);
            CHECK(integrate_basis(kv, i) == closed_form);
            const double oracle = oracles::gauss_over_spans(
                kv, [&](double t) { return eval_basis_raw(kv, i, t); });
            CHECK(integrate_basis(kv, i) == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
    // d=2 uniform simple knots with span h: support 3h, integral h.
    const KnotVector u = KnotVector::periodic_uniform(0.0, 1.0, 10, 2);
    CHECK(integrate_basis(u, 5) == doctest::Approx(0.1).epsilon(1e-15));
    // d=3: support 4h, integral h.
    const KnotVector u3 = KnotVector::periodic_uniform(0.0, 1.0, 10, 3);
    CHECK(integrate_basis(u3, 5) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("spline products are exact") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    SUBCASE("multiplying by one re-expresses the factor") {
        const KnotVector kvf = KnotVector::open_uniform(0.0, 1.0, 4, 2);
        const KnotVector kvg = KnotVector::open_uniform(0.0, 1.0, 3, 3);
        Vector ones = Vector::Ones(kvf.count());
        Vector coeffs(kvg.count());
        for (int i = 0; i < kvg.count(); ++i) coeffs[i] = uni(rng);
        const SplineFunction f(kvf, ones), g(kvg, coeffs);
        const SplineFunction prod = spline_product(f, g);
        for (int k = 0; k <= 100; ++k) {
            const double t = k / 100.0;
            CHECK(prod.value(t) == doctest::Approx(g.value(t)).epsilon(1e-12));
        }
    }

    SUBCASE("hat times hat") {
        const KnotVector kv = KnotVector::open_uniform(0.0, 1.0, 4, 1);
        Vector cf = Vector::Zero(kv.count()), cg = Vector::Zero(kv.count());
        cf[2] = 1.0;
        cg[3] = 1.0;
        const SplineFunction f(kv, cf), g(kv, cg);
        const SplineFunction prod = spline_product(f, g);
        CHECK(prod.knots().degree() == 2);
        for (int k = 0; k <= 50; ++k) {
            const double t = k / 50.0;
            CHECK(prod.value(t) == doctest::Approx(f.value(t) * g.value(t)).epsilon(1e-13));
        }
    }

    SUBCASE("random factors: pointwise oracle and integral consistency") {
        const KnotVector kvf({0, 0, 0, 0.3, 0.55, 0.55, 1, 1, 1}, 2, KnotKind::open);
        const KnotVector kvg = KnotVector::open_uniform(0.0, 1.0, 5, 3);
        Vector cf(kvf.count()), cg(kvg.count());
        for (int i = 0; i < cf.size(); ++i) cf[i] = uni(rng);
        for (int i = 0; i < cg.size(); ++i) cg[i] = uni(rng);
        const SplineFunction f(kvf, cf), g(kvg, cg);
        const SplineFunction prod = spline_product(f, g);
        double max_err = 0.0;
        for (int k = 0; k <= 200; ++k) {
            const double t = k / 200.0;
            max_err = std::max(max_err, std::abs(prod.value(t) - f.value(t) * g.value(t)));
        }
        CHECK(max_err < 1e-12);

        double closed = 0.0;
        for (int i = 0; i < prod.knots().count(); ++i)
            closed += prod.coefficients()[i] * integrate_basis(prod.knots(), i);
        const double oracle =
            oracles::gauss_over_spans(prod.knots(), [&](double t) { return f.value(t) * g.value(t); });
        CHECK(closed == doctest::Approx(oracle).epsilon(1e-12));
    }

    SUBCASE("mismatched domains are rejected") {
        const SplineFunction f(KnotVector::open_uniform(0.0, 1.0, 2, 1), Vector::Ones(3));
        const SplineFunction g(KnotVector::open_uniform(0.0, 2.0, 2, 1), Vector::Ones(3));
        CHECK_THROWS(spline_product(f, g));
    }
}

TEST_CASE("knot insertion and Bezier extraction preserve the spline") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    const KnotVector kv = KnotVector::open_uniform(0.0, 1.0, 4, 3);
    Vector coeffs(kv.count());
    for (int i = 0; i < coeffs.size(); ++i) coeffs[i] = uni(rng);
    const SplineFunction f(kv, coeffs);

    const SplineFunction g = insert_knot(insert_knot(f, 0.4), 0.625);
    for (int k = 0; k <= 64; ++k) {
        const double t = k / 64.0;
        CHECK(g.value(t) == doctest::Approx(f.value(t)).epsilon(1e-13));
    }

    const BezierSegments seg = to_bezier(f);
    REQUIRE(seg.breaks.size() == 5);
    for (std::size_t q = 0; q + 1 < seg.breaks.size(); ++q) {
        for (int s = 0; s <= 8; ++s) {
            const double u = s / 8.0;
            const double t = seg.breaks[q] + u * (seg.breaks[q + 1] - seg.breaks[q]);
            // de Casteljau on the extracted segment
            Vector b = seg.coeffs[q];
            for (int r = 1; r <= seg.degree; ++r)
                for (int j = 0; j <= seg.degree - r; ++j) b[j] = (1 - u) * b[j] + u * b[j + 1];
            CHECK(b[0] == doctest::Approx(f.value(t)).epsilon(1e-13));
        }
    }
}

TEST_CASE("de Boor-Fix functionals recover spline coefficients") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const KnotVector kv({0, 0, 0, 0, 0.2, 0.5, 0.5, 0.8, 1, 1, 1, 1}, 3, KnotKind::open);
    Vector coeffs(kv.count());
    for (int i = 0; i < coeffs.size(); ++i) coeffs[i] = uni(rng);
    const SplineFunction f(kv, coeffs);
    const Vector rec = deboor_fix_coefficients(
        kv, [&](double t, int nder, double* out) { f.derivatives(t, nder, out); });
    CHECK((rec - coeffs).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("log-log slope fit") {
    std::vector<double> x{1.0, 2.0, 4.0, 8.0}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -3.5));
    CHECK(fit_loglog_slope(x, y) == doctest::Approx(-3.5).epsilon(1e-12));
}
