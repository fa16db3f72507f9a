#include "igabem/problems.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "igabem/gauss.hpp"

namespace igabem {

namespace {

// Fixed composite double-layer evaluator for the right-hand side of the
// second BIE: mesh-independent, deterministic, refined near the source. The
// far-field node data is shared by every source point.
struct DirectRhsTable {
    struct Node {
        double t, j_u_w;
        Point2 point, normal;
    };
    struct CellData {
        double lo, hi;
        std::vector<Node> base;
    };
    std::shared_ptr<const SplineCurve> curve;
    BoundaryDatum u_D;
    std::vector<CellData> cells;
    double gamma;

    DirectRhsTable(std::shared_ptr<const SplineCurve> curve_in, BoundaryDatum datum)
        : curve(std::move(curve_in)), u_D(std::move(datum)) {
        gamma = curve->b() - curve->a();
        const auto part = curve->knots().breakpoints();
        for (std::size_t q = 0; q + 1 < part.breakpoints.size(); ++q) {
            CellData cell;
            cell.lo = part.breakpoints[q];
            cell.hi = part.breakpoints[q + 1];
            fill(cell.base, cell.lo, cell.hi, 6);
            cells.push_back(std::move(cell));
        }
    }

    void fill(std::vector<Node>& out, double lo, double hi, int pieces) const {
        const GaussRule& rule = gauss_legendre(20);
        out.clear();
        for (int piece = 0; piece < pieces; ++piece) {
            const double a = lo + (hi - lo) * piece / pieces;
            const double b = lo + (hi - lo) * (piece + 1) / pieces;
            for (int k = 0; k < rule.size(); ++k) {
                Node node;
                node.t = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[k];
                node.point = curve->point(node.t);
                node.normal = curve->normal(node.t);
                node.j_u_w = 0.5 * (b - a) * rule.weights[k] *
                             curve->parametric_speed(node.t) * u_D(node.point);
                out.push_back(node);
            }
        }
    }

    double operator()(double s) const {
        const Point2 Fs = curve->point(s);
        double dl = 0.0;
        std::vector<Node> refined;
        for (const CellData& cell : cells) {
            double dist = std::max({cell.lo - s, s - cell.hi, 0.0});
            dist = std::min({dist, std::max({cell.lo - s - gamma, s + gamma - cell.hi, 0.0}),
                             std::max({cell.lo - s + gamma, s - gamma - cell.hi, 0.0})});
            const std::vector<Node>* nodes = &cell.base;
            if (dist <= cell.hi - cell.lo) {
                fill(refined, cell.lo, cell.hi, 24);
                nodes = &refined;
            }
            for (const Node& node : *nodes) {
                double diff = node.t - s;
                diff -= gamma * std::round(diff / gamma);
                if (std::abs(diff) < 1e-5 * gamma) {
                    dl += double_layer_kernel(*curve, s, node.t) * node.j_u_w;
                } else {
                    const Point2 d = node.point - Fs;
                    dl += node.normal.dot(d) / d.squaredNorm() * node.j_u_w;
                }
            }
        }
        return 0.5 * u_D(Fs) - dl / (2.0 * M_PI);
    }
};

std::function<double(double)> make_direct_rhs(std::shared_ptr<const SplineCurve> curve,
                                              BoundaryDatum u_D) {
    auto table = std::make_shared<DirectRhsTable>(std::move(curve), std::move(u_D));
    return [table](double s) { return (*table)(s); };
}

double wrap_angle(const Point2& x) {
    double theta = std::atan2(x.y(), x.x());
    if (theta <= 0.0) theta += 2.0 * M_PI;
    return theta;  // branch (0, 2 pi]
}

}  // namespace

ProblemDefinition problem_slit() {
    KnotVector kv({0, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1}, 2, KnotKind::open);
    Eigen::Matrix2Xd ctrl(2, 7);
    ctrl << -1.0, -0.8, -0.4, 0.0, 0.4, 0.8, 1.0,
             0.0,  0.0,  0.0, 0.0, 0.0, 0.0, 0.0;
    ProblemDefinition p;
    p.name = "slit";
    p.curve = std::make_shared<SplineCurve>(std::move(kv), std::move(ctrl));
    p.approach = Approach::indirect;
    p.norm = ErrorNorm::energy;
    p.dirichlet = [](const Point2& x) { return -0.5 * x.x(); };
    auto u_D = p.dirichlet;
    auto curve = p.curve;
    p.rhs_param = [curve, u_D](double s) { return u_D(curve->point(s)); };
    // phi = -x1 (1 - x1^2)^{-1/2} with x1 = 2t - 1; the t-form of the root
    // stays accurate at the poles.
    p.exact_phi = [](double t) {
        return -(2.0 * t - 1.0) / (2.0 * std::sqrt(t * (1.0 - t)));
    };
    p.exact_energy_sq = M_PI / 4.0;
    p.reference = ReferenceParams{1.0 - 1e-2, 6, 12, 2, 10};
    return p;
}

ProblemDefinition problem_pacman() {
    KnotVector kv = KnotVector::periodic_uniform(-1.0, 1.0, 12, 3);
    Eigen::Matrix2Xd ctrl(2, 15);
    ctrl << -1.0, -1.0 / 3, 2.0 / 5, 7.0 / 8, 7.0 / 8, -1.0 / 25, -1.0 / 25, 7.0 / 8, 7.0 / 8,
        2.0 / 5, -1.0 / 3, -1.0, -1.0, -1.0 / 3, 2.0 / 5,
        -0.5, -1.0, -1.0, -0.5, -0.5, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 0.5, -0.5, -1.0, -1.0;
    ProblemDefinition p;
    p.name = "pacman";
    p.curve = std::make_shared<SplineCurve>(std::move(kv), std::move(ctrl));
    p.approach = Approach::direct;
    p.norm = ErrorNorm::l2;
    auto exact_u = [](const Point2& x) {
        const double r = x.norm();
        const double theta = wrap_angle(x);
        return -std::sqrt(r) * std::cos(0.5 * (theta + M_PI));
    };
    p.exact_u = exact_u;
    p.dirichlet = exact_u;
    p.rhs_param = make_direct_rhs(p.curve, p.dirichlet);
    auto curve = p.curve;
    p.exact_phi = [curve](double t) {
        const Point2 x = curve->point(t);
        const double r = x.norm();
        const double theta = wrap_angle(x);
        const Point2 grad(-0.5 / std::sqrt(r) * std::sin(0.5 * theta),
                          0.5 / std::sqrt(r) * std::cos(0.5 * theta));
        return grad.dot(curve->normal(t));
    };
    p.reference = ReferenceParams{0.8, 12, 36, 2, 12};
    return p;
}

ProblemDefinition problem_lshape() {
    KnotVector kv = KnotVector::periodic_uniform(-1.0, 1.0, 20, 3);
    const double e = 1.0 / 50.0;
    const double eb = 49.0 / 50.0;
    Eigen::Matrix2Xd ctrl(2, 23);
    ctrl << 0, 0, 0, 0, -e, -eb, -1, -1, -1, -1, -1, -eb, 0, eb, 1, 1, 1, 1, eb, e, 0, 0, 0,
        0, e, eb, 1, 1, 1, 1, eb, 0, -eb, -1, -1, -1, -1, -1, -eb, -e, 0, 0, 0, 0, e, eb;
    ProblemDefinition p;
    p.name = "lshape";
    p.curve = std::make_shared<SplineCurve>(std::move(kv), std::move(ctrl));
    p.approach = Approach::direct;
    p.norm = ErrorNorm::l2;
    const Point2 delta(-1.0 / 250.0, -1.0 / 250.0);
    auto exact_u = [delta](const Point2& x) { return 0.5 * std::log((x + delta).squaredNorm()); };
    p.exact_u = exact_u;
    p.dirichlet = exact_u;
    p.rhs_param = make_direct_rhs(p.curve, p.dirichlet);
    auto curve = p.curve;
    p.exact_phi = [curve, delta](double t) {
        const Point2 x = curve->point(t);
        const Point2 shifted = x + delta;
        return shifted.dot(curve->normal(t)) / shifted.squaredNorm();
    };
    p.reference = ReferenceParams{0.99, 12, 12, 2, 12};
    return p;
}

namespace {

BoundaryDatum named_datum(const std::string& name) {
    if (name == "zero") return [](const Point2&) { return 0.0; };
    if (name == "one") return [](const Point2&) { return 1.0; };
    if (name == "slit_rhs") return problem_slit().dirichlet;
    if (name == "pacman_trace") return problem_pacman().dirichlet;
    if (name == "lshape_trace") return problem_lshape().dirichlet;
    throw std::invalid_argument("unknown boundary datum: " + name);
}

}  // namespace

ProblemDefinition load_problem(const std::string& name_or_path) {
    if (name_or_path == "slit") return problem_slit();
    if (name_or_path == "pacman") return problem_pacman();
    if (name_or_path == "lshape") return problem_lshape();

    std::ifstream in(name_or_path);
    if (!in) throw std::invalid_argument("unknown problem or unreadable file: " + name_or_path);
    nlohmann::json j;
    in >> j;

    const int degree = j.at("degree").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<double> knots = j.at("knots").get<std::vector<double>>();
    KnotVector kv(std::move(knots), degree,
                  kind == "periodic" ? KnotKind::periodic : KnotKind::open);
    const auto cps = j.at("control_points").get<std::vector<std::vector<double>>>();
    Eigen::Matrix2Xd ctrl(2, static_cast<int>(cps.size()));
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (cps[i].size() != 2)
            throw std::invalid_argument("control_points must be pairs [x, y]");
        ctrl.col(static_cast<int>(i)) = Point2(cps[i][0], cps[i][1]);
    }

    ProblemDefinition p;
    p.name = j.value("name", std::string("custom"));
    p.curve = std::make_shared<SplineCurve>(std::move(kv), std::move(ctrl));
    p.approach =
        j.value("approach", std::string("indirect")) == "direct" ? Approach::direct
                                                                 : Approach::indirect;
    p.norm = j.value("norm", std::string("energy")) == "l2" ? ErrorNorm::l2 : ErrorNorm::energy;
    p.dirichlet = named_datum(j.at("datum").get<std::string>());
    if (p.approach == Approach::direct) {
        p.rhs_param = make_direct_rhs(p.curve, p.dirichlet);
    } else {
        auto curve = p.curve;
        auto u_D = p.dirichlet;
        p.rhs_param = [curve, u_D](double s) { return u_D(curve->point(s)); };
    }
    if (j.contains("reference")) {
        const auto& r = j.at("reference");
        p.reference.theta = r.value("theta", p.reference.theta);
        p.reference.n_inner = r.value("n_inner", p.reference.n_inner);
        p.reference.n_outer = r.value("n_outer", p.reference.n_outer);
        p.reference.qi_degree = r.value("p", p.reference.qi_degree);
        p.reference.max_iter = r.value("max_iter", p.reference.max_iter);
    }
    return p;
}

double l2_error(const DensitySolution& solution, const ProblemDefinition& problem,
                const HierarchicalMesh& mesh, int nodes_per_cell) {
    if (!problem.has_exact_phi())
        throw std::invalid_argument("l2_error: problem has no exact solution");
    const SplineCurve& curve = *problem.curve;
    double sum = 0.0;
    for (const Cell& c : mesh.active_cells()) {
        sum += gauss_integrate(nodes_per_cell, mesh.lo(c), mesh.hi(c), [&](double t) {
            const double diff = problem.exact_phi(t) - solution.eval_param(t);
            return diff * diff * curve.parametric_speed(t);
        });
    }
    return std::sqrt(sum);
}

double energy_error(double exact_energy_sq, double discrete_energy_sq) {
    return std::sqrt(std::max(0.0, exact_energy_sq - discrete_energy_sq));
}

}  // namespace igabem
