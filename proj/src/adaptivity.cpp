#include "igabem/adaptivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "igabem/gauss.hpp"
#include "igabem/parallel.hpp"

namespace igabem {

Patch build_patch(const HierarchicalMesh& mesh, std::size_t cell_index) {
    const auto& cells = mesh.active_cells();
    const std::size_t n = cells.size();
    const bool periodic = mesh.ladder().kind() == KnotKind::periodic;
    Patch patch;
    patch.cell_index = cell_index;

    // Active cells tile the domain in parametric order; neighbours share an
    // endpoint (wrapping for closed curves).
    auto push = [&](std::size_t idx) {
        for (std::size_t m : patch.members)
            if (m == idx) return;
        patch.members.push_back(idx);
    };
    if (cell_index > 0)
        push(cell_index - 1);
    else if (periodic && n > 1)
        push(n - 1);
    push(cell_index);
    if (cell_index + 1 < n)
        push(cell_index + 1);
    else if (periodic && n > 1)
        push(0);

    for (std::size_t m : patch.members) {
        const Cell& c = cells[m];
        patch.intervals.emplace_back(mesh.lo(c), mesh.hi(c));
    }
    return patch;
}

double ResidualEvaluator::operator()(double s) const {
    return problem_->rhs_param(s) - eval_Vphi(*solution_, *engine_, s);
}

double patch_seminorm_sq(const SplineCurve& curve, const Patch& patch,
                         const std::function<double(double)>& residual, int q) {
    const GaussRule& gx = gauss_legendre(q);
    const GaussRule& gy = gauss_legendre(q + 1);

    struct NodeData {
        double r, j, w;
        Point2 p;
    };
    std::vector<std::vector<NodeData>> xs, ys;
    for (const auto& [lo, hi] : patch.intervals) {
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        std::vector<NodeData> xrow(q), yrow(q + 1);
        for (int k = 0; k < q; ++k) {
            const double t = mid + half * gx.nodes[k];
            xrow[k] = {residual(t), curve.parametric_speed(t), half * gx.weights[k],
                       curve.point(t)};
        }
        for (int k = 0; k < q + 1; ++k) {
            const double t = mid + half * gy.nodes[k];
            yrow[k] = {residual(t), curve.parametric_speed(t), half * gy.weights[k],
                       curve.point(t)};
        }
        xs.push_back(std::move(xrow));
        ys.push_back(std::move(yrow));
    }

    double sum = 0.0;
    for (std::size_t a = 0; a < xs.size(); ++a) {
        for (std::size_t b = 0; b < ys.size(); ++b) {
            for (const NodeData& x : xs[a]) {
                for (const NodeData& y : ys[b]) {
                    const double dr = x.r - y.r;
                    const double d2 = (x.p - y.p).squaredNorm();
                    sum += x.w * y.w * x.j * y.j * dr * dr / d2;
                }
            }
        }
    }
    return sum;
}

EstimatorReport estimate(const HierarchicalMesh& mesh, const ProblemDefinition& problem,
                         const DensitySolution& solution, const QuadratureEngine& engine, int q) {
    const SplineCurve& curve = *problem.curve;
    const auto& cells = mesh.active_cells();
    const std::size_t n = cells.size();
    const GaussRule& gx = gauss_legendre(q);
    const GaussRule& gy = gauss_legendre(q + 1);
    const ResidualEvaluator residual(problem, solution, engine);

    // Residuals, speeds and physical points per cell for both staggered rules.
    struct NodeData {
        double r, j, w;
        Point2 p;
    };
    std::vector<std::vector<NodeData>> xs(n), ys(n);
    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t c) {
        const double lo = mesh.lo(cells[c]), hi = mesh.hi(cells[c]);
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        xs[c].resize(q);
        ys[c].resize(q + 1);
        for (int k = 0; k < q; ++k) {
            const double t = mid + half * gx.nodes[k];
            xs[c][k] = {residual(t), curve.parametric_speed(t), half * gx.weights[k],
                        curve.point(t)};
        }
        for (int k = 0; k < q + 1; ++k) {
            const double t = mid + half * gy.nodes[k];
            ys[c][k] = {residual(t), curve.parametric_speed(t), half * gy.weights[k],
                        curve.point(t)};
        }
    });

    EstimatorReport report;
    report.eta_sq = Vector::Zero(n);
    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t c) {
        const Patch patch = build_patch(mesh, c);
        double sum = 0.0;
        for (std::size_t a : patch.members) {
            for (std::size_t b : patch.members) {
                for (const NodeData& x : xs[a]) {
                    for (const NodeData& y : ys[b]) {
                        const double dr = x.r - y.r;
                        const double d2 = (x.p - y.p).squaredNorm();
                        sum += x.w * y.w * x.j * y.j * dr * dr / d2;
                    }
                }
            }
        }
        report.eta_sq[c] = sum;
    });
    report.eta_global = std::sqrt(report.eta_sq.sum());
    return report;
}

std::vector<Cell> mark(const HierarchicalMesh& mesh, const EstimatorReport& report, double theta,
                       DorflerSum convention) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("mark: theta must lie in (0, 1]");
    const auto& cells = mesh.active_cells();
    const std::size_t n = cells.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (report.eta_sq[a] != report.eta_sq[b]) return report.eta_sq[a] > report.eta_sq[b];
        if (cells[a].level != cells[b].level) return cells[a].level < cells[b].level;
        return mesh.lo(cells[a]) < mesh.lo(cells[b]);
    });

    double threshold = 0.0;
    switch (convention) {
        case DorflerSum::printed:
            threshold = theta * report.eta_global;
            break;
        case DorflerSum::pure_linear: {
            double total = 0.0;
            for (std::size_t c = 0; c < n; ++c) total += std::sqrt(report.eta_sq[c]);
            threshold = theta * total;
            break;
        }
        case DorflerSum::squared:
            threshold = theta * report.eta_sq.sum();
            break;
    }

    std::vector<Cell> marked;
    double acc = 0.0;
    for (std::size_t idx : order) {
        if (acc >= threshold) break;
        if (report.eta_sq[idx] <= 0.0) break;
        marked.push_back(cells[idx]);
        acc += convention == DorflerSum::squared ? report.eta_sq[idx]
                                                 : std::sqrt(report.eta_sq[idx]);
    }
    return marked;
}

std::vector<AdaptiveState> adaptive_loop(const ProblemDefinition& problem,
                                         const AdaptiveParams& params) {
    const SplineCurve& curve = *problem.curve;
    const KernelSplit split(curve);
    LevelLadder ladder(curve.knots());
    SubdomainHierarchy regions;

    std::vector<AdaptiveState> states;
    for (int it = 0; it < params.max_iter; ++it) {
        auto [mesh, basis] = build_hierarchy(ladder, regions);
        QuadratureEngine engine(QuadratureEngine::supports_from(basis), split, params.quad);

        GalerkinSystem system;
        system.A = assemble_matrix(engine, &system.pre_symmetry_residual);
        const Vector beta1 = assemble_rhs_indirect(engine, problem.dirichlet);
        system.rhs = problem.approach == Approach::direct
                         ? Vector(0.5 * beta1 -
                                  assemble_rhs_double_layer(engine, mesh, problem.dirichlet) /
                                      (2.0 * M_PI))
                         : beta1;
        SolveReport solve_report;
        const Vector alpha = solve_system(system, &solve_report);
        const DensitySolution solution(alpha, &basis, &curve);

        AdaptiveState state;
        state.iteration = it;
        state.n_dof = basis.size();
        state.deepest_level = mesh.deepest_level();
        state.alpha = alpha;
        state.solve = solve_report;
        if (problem.norm == ErrorNorm::energy && problem.exact_energy_sq) {
            state.error = energy_error(*problem.exact_energy_sq,
                                       energy_norm_sq(solution, beta1));
        } else if (problem.has_exact_phi()) {
            state.error = l2_error(solution, problem, mesh);
        }

        const EstimatorReport report = estimate(mesh, problem, solution, engine,
                                                params.seminorm_nodes);
        state.eta = report.eta_global;
        state.eta_sq = report.eta_sq;

        std::vector<Cell> marked;
        if (params.uniform) {
            marked = mesh.active_cells();
        } else {
            marked = mark(mesh, report, params.theta, params.convention);
        }
        state.marked = marked;
        state.marked_count = static_cast<std::int64_t>(marked.size());
        state.mesh = std::make_shared<HierarchicalMesh>(mesh);
        state.regions = std::make_shared<SubdomainHierarchy>(regions);
        states.push_back(std::move(state));

        if (params.target_dof > 0 && basis.size() >= params.target_dof) break;
        if (it + 1 < params.max_iter) regions = refine(regions, mesh, marked);
    }
    return states;
}

}  // namespace igabem
