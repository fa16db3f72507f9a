#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "igabem/adaptivity.hpp"
#include "oracles.hpp"

using namespace igabem;

namespace {

HierarchicalMesh unit_line_mesh(int cells) {
    LevelLadder ladder(KnotVector::open_uniform(0.0, 1.0, cells, 1));
    auto [mesh, basis] = build_hierarchy(ladder, trivial_regions());
    return mesh;
}

SplineCurve unit_line() {
    KnotVector kv = KnotVector::open_uniform(0.0, 1.0, 1, 1);
    Eigen::Matrix2Xd ctrl(2, 2);
    ctrl << 0.0, 1.0,
            0.0, 0.0;
    return SplineCurve(std::move(kv), std::move(ctrl));
}

}  // namespace

TEST_CASE("patches collect the touching neighbours") {
    const HierarchicalMesh mesh = unit_line_mesh(5);
    const Patch inner = build_patch(mesh, 2);
    CHECK(inner.members.size() == 3);
    const Patch left = build_patch(mesh, 0);
    CHECK(left.members.size() == 2);  // open curve: no left neighbour

    LevelLadder ladder(KnotVector::periodic_uniform(0.0, 1.0, 6, 2));
    auto [pmesh, pbasis] = build_hierarchy(ladder, trivial_regions());
    const Patch seam = build_patch(pmesh, 0);
    CHECK(seam.members.size() == 3);  // wraps across the seam
}

TEST_CASE("patch seminorm: constants, linear residual, self-convergence") {
    const SplineCurve line = unit_line();
    const HierarchicalMesh mesh = unit_line_mesh(1);
    const Patch patch = build_patch(mesh, 0);

    CHECK(patch_seminorm_sq(line, patch, [](double) { return 3.7; }) ==
          doctest::Approx(0.0).scale(1.0));

    // R(s) = s on a straight unit-speed segment: integrand is identically 1.
    CHECK(patch_seminorm_sq(line, patch, [](double s) { return s; }) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Smooth residual on a 2-cell patch: doubling the nodes moves the value
    // by less than 2 percent.
    const HierarchicalMesh mesh2 = unit_line_mesh(2);
    const Patch patch2 = build_patch(mesh2, 0);
    auto residual = [](double s) { return std::sin(3.0 * s) + 0.5 * s * s; };
    const double coarse = patch_seminorm_sq(line, patch2, residual, 8);
    const double fine = patch_seminorm_sq(line, patch2, residual, 16);
    CHECK(std::abs(coarse - fine) < 0.02 * std::abs(fine));
}

TEST_CASE("marking") {
    const HierarchicalMesh mesh = unit_line_mesh(10);

    SUBCASE("uniform distribution under the pure linear convention") {
        EstimatorReport report;
        report.eta_sq = Vector::Ones(10);
        report.eta_global = std::sqrt(10.0);
        // theta = 0.35: ceil(0.35 * 10) = 4 cells.
        CHECK(mark(mesh, report, 0.35, DorflerSum::pure_linear).size() == 4);
        // theta = 1 marks every cell with a positive indicator.
        CHECK(mark(mesh, report, 1.0, DorflerSum::pure_linear).size() == 10);
    }

    SUBCASE("theta -> 0 marks the single largest cell") {
        EstimatorReport report;
        report.eta_sq = Vector::Ones(10);
        report.eta_sq[7] = 4.0;
        report.eta_global = std::sqrt(report.eta_sq.sum());
        for (auto conv : {DorflerSum::printed, DorflerSum::pure_linear, DorflerSum::squared}) {
            const auto marked = mark(mesh, report, 1e-9, conv);
            REQUIRE(marked.size() == 1);
            CHECK(marked[0].index == 7);
        }
    }

    SUBCASE("validity and greedy minimality for every convention") {
        std::mt19937 rng(99);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        EstimatorReport report;
        report.eta_sq = Vector(10);
        for (int i = 0; i < 10; ++i) report.eta_sq[i] = std::pow(uni(rng), 3);
        report.eta_global = std::sqrt(report.eta_sq.sum());
        Vector eta = report.eta_sq.cwiseSqrt();

        for (auto conv : {DorflerSum::printed, DorflerSum::pure_linear, DorflerSum::squared}) {
            for (double theta : {0.2, 0.5, 0.9, 1.0}) {
                const auto marked = mark(mesh, report, theta, conv);
                double marked_lin = 0.0, marked_sq = 0.0, total_lin = 0.0;
                for (int i = 0; i < 10; ++i) total_lin += eta[i];
                double smallest = 1e300;
                for (const Cell& c : marked) {
                    marked_lin += eta[c.index];
                    marked_sq += report.eta_sq[c.index];
                    smallest = std::min(smallest, eta[c.index]);
                }
                // the chosen inequality holds...
                switch (conv) {
                    case DorflerSum::printed:
                        CHECK(marked_lin >= theta * report.eta_global - 1e-14);
                        if (marked.size() > 1)  // ...and breaks without the smallest member
                            CHECK(marked_lin - smallest < theta * report.eta_global);
                        break;
                    case DorflerSum::pure_linear:
                        CHECK(marked_lin >= theta * total_lin - 1e-14);
                        if (marked.size() > 1)
                            CHECK(marked_lin - smallest < theta * total_lin);
                        break;
                    case DorflerSum::squared:
                        CHECK(marked_sq >= theta * report.eta_sq.sum() - 1e-14);
                        if (marked.size() > 1)
                            CHECK(marked_sq - smallest * smallest < theta * report.eta_sq.sum());
                        break;
                }
            }
        }
    }

    SUBCASE("marking is invariant under positive scaling of the indicators") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        EstimatorReport report;
        report.eta_sq = Vector(10);
        for (int i = 0; i < 10; ++i) report.eta_sq[i] = uni(rng);
        report.eta_global = std::sqrt(report.eta_sq.sum());
        EstimatorReport scaled;
        scaled.eta_sq = 17.3 * report.eta_sq;
        scaled.eta_global = std::sqrt(scaled.eta_sq.sum());
        for (auto conv : {DorflerSum::printed, DorflerSum::pure_linear, DorflerSum::squared}) {
            const auto a = mark(mesh, report, 0.6, conv);
            const auto b = mark(mesh, scaled, 0.6, conv);
            CHECK(a == b);
        }
        CHECK(scaled.eta_global == doctest::Approx(std::sqrt(17.3) * report.eta_global));
    }

    SUBCASE("invalid theta is rejected") {
        EstimatorReport report;
        report.eta_sq = Vector::Ones(10);
        report.eta_global = std::sqrt(10.0);
        CHECK_THROWS(mark(mesh, report, 0.0, DorflerSum::printed));
        CHECK_THROWS(mark(mesh, report, 1.5, DorflerSum::printed));
    }
}

TEST_CASE("estimator on the slit problem") {
    const ProblemDefinition p = problem_slit();
    LevelLadder ladder(p.curve->knots());
    auto [mesh, basis] = build_hierarchy(ladder, trivial_regions());
    const KernelSplit split(*p.curve);
    QuadConfig cfg;
    cfg.n_inner = 6;
    cfg.n_outer = 12;
    QuadratureEngine engine(QuadratureEngine::supports_from(basis), split, cfg);
    GalerkinSystem sys;
    sys.A = assemble_matrix(engine);
    sys.rhs = assemble_rhs_indirect(engine, p.dirichlet);
    const Vector alpha = solve_system(sys);
    const DensitySolution sol(alpha, &basis, p.curve.get());

    SUBCASE("zero density leaves the residual equal to f") {
        const DensitySolution zero(Vector::Zero(basis.size()), &basis, p.curve.get());
        const ResidualEvaluator residual(p, zero, engine);
        for (double s : {0.1, 0.45, 0.9})
            CHECK(residual(s) == doctest::Approx(p.rhs_param(s)).epsilon(1e-14));
    }

    SUBCASE("largest indicators sit at the endpoint cells") {
        const EstimatorReport report = estimate(mesh, p, sol, engine);
        CHECK(report.eta_global > 0.0);
        double total = 0.0;
        for (std::int64_t c = 0; c < report.eta_sq.size(); ++c) total += report.eta_sq[c];
        CHECK(report.eta_global == doctest::Approx(std::sqrt(total)).epsilon(1e-12));
        // The pole cells and their immediate neighbours carry the largest
        // indicators (a patch containing another's can only be larger).
        std::int64_t argmax = 0;
        for (std::int64_t c = 0; c < report.eta_sq.size(); ++c)
            if (report.eta_sq[c] > report.eta_sq[argmax]) argmax = c;
        const auto n = report.eta_sq.size();
        CHECK(std::min(argmax, n - 1 - argmax) <= 1);
    }

    SUBCASE("exact-density residual is at quadrature-noise level") {
        // Substitute the exact solution via oracle quadrature of V phi.
        for (double s : {0.2, 0.5, 0.8}) {
            const double Vphi =
                -1.0 / (2.0 * M_PI) *
                oracles::gauss_singular_split(
                    [&](double t) {
                        return std::log(2.0 * std::abs(s - t)) * p.exact_phi(t) * 2.0;
                    },
                    0.0, 1.0, {0.0, s, 1.0}, 64);
            CHECK(std::abs(p.rhs_param(s) - Vphi) < 1e-4);
        }
    }
}

TEST_CASE("adaptive loop records a decreasing history") {
    const ProblemDefinition p = problem_slit();
    AdaptiveParams params;
    params.quad.n_inner = 6;
    params.quad.n_outer = 12;
    params.theta = 0.9;
    params.max_iter = 4;
    params.convention = DorflerSum::squared;
    const auto states = adaptive_loop(p, params);
    REQUIRE(states.size() == 4);
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
        CHECK(states[k + 1].n_dof >= states[k].n_dof);
        CHECK(states[k + 1].eta <= 1.05 * states[k].eta);
        CHECK(*states[k + 1].error <= *states[k].error * 1.02);
    }
    CHECK(states.back().deepest_level >= 2);

    // DOF-target stop
    AdaptiveParams capped = params;
    capped.max_iter = 50;
    capped.target_dof = 12;
    const auto capped_states = adaptive_loop(p, capped);
    CHECK(capped_states.back().n_dof >= 12);
    CHECK(capped_states.size() < 50);
}
