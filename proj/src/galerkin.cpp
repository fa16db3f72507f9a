#include "igabem/galerkin.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "igabem/parallel.hpp"
#include "igabem/quasi_interp.hpp"

namespace igabem {

Matrix assemble_matrix(const QuadratureEngine& engine, double* pre_symmetry_residual) {
    const auto n = engine.size();
    Matrix A(n, n);
    parallel_for(n, [&](std::int64_t i) {
        for (std::int64_t j = 0; j < n; ++j) A(i, j) = engine.matrix_entry(i, j);
    });
    double residual = 0.0;
    const double scale = A.cwiseAbs().maxCoeff();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j)
            residual = std::max(residual, std::abs(A(i, j) - A(j, i)));
    if (pre_symmetry_residual) *pre_symmetry_residual = scale > 0 ? residual / scale : 0.0;
    A = 0.5 * (A + A.transpose()).eval();
    return A;
}

Vector assemble_rhs_indirect(const QuadratureEngine& engine, const BoundaryDatum& u_D) {
    const auto n = engine.size();
    const SplineCurve& curve = engine.split().curve();
    Vector beta(n);
    parallel_for(n, [&](std::int64_t i) {
        beta[i] = engine.apply_outer(i, [&](double t) {
            return curve.parametric_speed(t) * u_D(curve.point(t));
        });
    });
    return beta;
}

double double_layer_kernel(const SplineCurve& curve, double s, double t) {
    const double gamma = curve.b() - curve.a();
    double diff = t - s;
    if (curve.closed()) diff -= gamma * std::round(diff / gamma);
    if (std::abs(diff) < 1e-5 * gamma) {
        // kappa(t)/2 plus the first-order term in (t - s).
        const Point2 d1 = curve.derivative(t, 1);
        const Point2 d2 = curve.derivative(t, 2);
        const Point2 d3 = curve.derivative(t, 3);
        const double J2 = d1.squaredNorm();
        const double sigma = curve.orientation();
        const double kappa = sigma * (d1.x() * d2.y() - d1.y() * d2.x()) / (J2 * std::sqrt(J2));
        const double n_dot_d3 = sigma * (d1.y() * d3.x() - d1.x() * d3.y()) / std::sqrt(J2);
        return 0.5 * kappa + diff * (n_dot_d3 / (6.0 * J2) + 0.5 * kappa * d1.dot(d2) / J2);
    }
    const Point2 x = curve.point(s);
    const Point2 y = curve.point(t);
    const Point2 d = y - x;
    return curve.normal(t).dot(d) / d.squaredNorm();
}

namespace {

// Precomputed node data for the inner double-layer sweeps: the far-field part
// is shared by every source; cells near the source are re-integrated with a
// finer subdivision on the fly.
struct DoubleLayerTable {
    struct Node {
        double t, j_u_w;  // weight * J * u_D
        Point2 point, normal;
    };
    struct CellData {
        double lo, hi;
        std::vector<Node> base;
    };
    std::vector<CellData> cells;
    const SplineCurve* curve = nullptr;
    const BoundaryDatum* u_D = nullptr;
    Vector unit_nodes, unit_weights;
    double gamma = 0.0;
    bool closed = false;
    int fine_pieces = 4;

    DoubleLayerTable(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                     const BoundaryDatum& datum, int subdivisions)
        : curve(&engine.split().curve()), u_D(&datum) {
        const int n = engine.config().n_inner;
        const int p = engine.config().qi_degree;
        const QIRule unit_rule = qi_quadrature(QISpace(0.0, 1.0, p, n));
        unit_nodes = unit_rule.space.nodes();
        unit_weights = unit_rule.weights;
        gamma = curve->b() - curve->a();
        closed = curve->closed();
        fine_pieces = 4 * subdivisions;
        for (const Cell& c : mesh.active_cells()) {
            CellData data;
            data.lo = mesh.lo(c);
            data.hi = mesh.hi(c);
            fill(data.base, data.lo, data.hi, subdivisions);
            cells.push_back(std::move(data));
        }
    }

    void fill(std::vector<Node>& out, double lo, double hi, int pieces) const {
        const double w = (hi - lo) / pieces;
        out.clear();
        out.reserve(pieces * (unit_nodes.size()));
        for (int piece = 0; piece < pieces; ++piece) {
            for (int k = 0; k < unit_nodes.size(); ++k) {
                Node node;
                node.t = lo + piece * w + w * unit_nodes[k];
                node.point = curve->point(node.t);
                node.normal = curve->normal(node.t);
                node.j_u_w = w * unit_weights[k] * curve->parametric_speed(node.t) *
                             (*u_D)(node.point);
                out.push_back(node);
            }
        }
    }

    double kernel(double s, const Point2& Fs, const Node& node) const {
        double diff = node.t - s;
        if (closed) diff -= gamma * std::round(diff / gamma);
        if (std::abs(diff) < 1e-5 * gamma)
            return double_layer_kernel(*curve, s, node.t) * node.j_u_w;
        const Point2 d = node.point - Fs;
        return node.normal.dot(d) / d.squaredNorm() * node.j_u_w;
    }

    double evaluate(double s) const {
        const Point2 Fs = curve->point(s);
        double total = 0.0;
        std::vector<Node> refined;
        for (const CellData& cell : cells) {
            double dist = std::max({cell.lo - s, s - cell.hi, 0.0});
            if (closed) {
                dist = std::min(
                    {dist, std::max({cell.lo - s - gamma, s + gamma - cell.hi, 0.0}),
                     std::max({cell.lo - s + gamma, s - gamma - cell.hi, 0.0})});
            }
            if (dist <= cell.hi - cell.lo) {
                fill(refined, cell.lo, cell.hi, fine_pieces);
                for (const Node& node : refined) total += kernel(s, Fs, node);
            } else {
                for (const Node& node : cell.base) total += kernel(s, Fs, node);
            }
        }
        return total;
    }
};

}  // namespace

double double_layer_integral(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                             const BoundaryDatum& u_D, double s, int subdivisions) {
    return DoubleLayerTable(engine, mesh, u_D, subdivisions).evaluate(s);
}

Vector assemble_rhs_double_layer(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                                 const BoundaryDatum& u_D) {
    if (!engine.split().closed())
        throw std::invalid_argument("assemble_rhs_double_layer: direct approach needs a closed curve");
    const auto n = engine.size();
    const SplineCurve& curve = engine.split().curve();
    const DoubleLayerTable table(engine, mesh, u_D, 2);
    Vector beta2(n);
    parallel_for(n, [&](std::int64_t i) {
        beta2[i] = engine.apply_outer(i, [&](double s) {
            return curve.parametric_speed(s) * table.evaluate(s);
        });
    });
    return beta2;
}

Vector assemble_rhs_direct(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                           const BoundaryDatum& u_D) {
    const Vector beta1 = assemble_rhs_indirect(engine, u_D);
    const Vector beta2 = assemble_rhs_double_layer(engine, mesh, u_D);
    return 0.5 * beta1 - beta2 / (2.0 * M_PI);
}

double DensitySolution::eval_param(double t) const {
    double sum = 0.0;
    for (std::int64_t j : basis_->functions_at(t)) sum += alpha_[j] * basis_->eval(j, t);
    return sum;
}

Vector solve_system(GalerkinSystem& system, SolveReport* report) {
    const auto n = system.A.rows();
    if (n == 0) throw std::invalid_argument("solve_system: empty system");
    Matrix S = system.scale * system.A;
    Vector alpha;
    bool indefinite = false;
    double min_eig = 0.0;

    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
        llt.compute((-S).eval());
        if (llt.info() == Eigen::Success) {
            system.negated = true;
            S = -S;
        } else {
            // Indefinite single-layer operator (boundary capacity >= 1);
            // solve with a symmetric indefinite factorization instead.
            indefinite = true;
            Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
            min_eig = eig.eigenvalues().minCoeff();
        }
    }
    if (indefinite) {
        Eigen::LDLT<Matrix> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error(
                "solve_system: factorization failed; smallest eigenvalue of the scaled "
                "operator is " +
                std::to_string(min_eig));
        alpha = ldlt.solve(system.rhs);
        alpha += ldlt.solve(system.rhs - S * alpha);
    } else {
        const Vector rhs = system.negated ? (-system.rhs).eval() : system.rhs;
        alpha = llt.solve(rhs);
        alpha += llt.solve(rhs - S * alpha);  // one step of iterative refinement
    }
    if (report) {
        report->negated = system.negated;
        report->indefinite = indefinite;
        report->min_eigenvalue = min_eig;
        const Vector rhs_used =
            (system.negated && !indefinite) ? Vector(-system.rhs) : system.rhs;
        const double denom = rhs_used.norm();
        report->residual = denom > 0 ? (S * alpha - rhs_used).norm() / denom : 0.0;
    }
    return alpha;
}

double energy_norm_sq(const DensitySolution& solution, const Vector& beta1) {
    const double value = solution.coefficients().dot(beta1);
    if (value < -1e-12)
        throw std::runtime_error("energy_norm_sq: negative energy indicates an assembly error");
    return std::max(0.0, value);
}

double eval_Vphi(const DensitySolution& solution, const QuadratureEngine& engine, double s) {
    const Point2 Fs = engine.split().curve().point(s);
    double sum = 0.0;
    for (std::int64_t j = 0; j < engine.size(); ++j) {
        if (solution.coefficients()[j] == 0.0) continue;
        sum += solution.coefficients()[j] * engine.inner_U_from(j, s, Fs);
    }
    return -sum / (2.0 * M_PI);
}

double evaluate_potential(const DensitySolution& solution, const QuadratureEngine& engine,
                          const HierarchicalMesh& mesh, const BoundaryDatum& u_D, Approach approach,
                          const Point2& x, double min_distance) {
    const SplineCurve& curve = engine.split().curve();
    double dist = std::numeric_limits<double>::infinity();
    double arg = curve.a();
    double bracket = 0.0;
    for (const Cell& c : mesh.active_cells()) {
        for (int k = 0; k <= 8; ++k) {
            const double t = mesh.lo(c) + (mesh.hi(c) - mesh.lo(c)) * k / 8.0;
            const double d = (curve.point(t) - x).norm();
            if (d < dist) {
                dist = d;
                arg = t;
                bracket = (mesh.hi(c) - mesh.lo(c)) / 8.0;
            }
        }
    }
    // Local refinement around the closest coarse sample.
    for (int round = 0; round < 40 && bracket > 1e-14; ++round) {
        double best = arg;
        for (int k = -3; k <= 3; ++k) {
            const double t = std::clamp(arg + k * bracket / 3.0, curve.a(), curve.b());
            const double d = (curve.point(t) - x).norm();
            if (d < dist) {
                dist = d;
                best = t;
            }
        }
        arg = best;
        bracket /= 3.0;
    }
    if (dist < min_distance)
        throw std::invalid_argument("evaluate_potential: point too close to the boundary");

    double single = 0.0;
    for (std::int64_t j = 0; j < engine.size(); ++j) {
        const RegularRule& rule = engine.inner_rule(j);
        double acc = 0.0;
        for (int k = 0; k < rule.nodes.size(); ++k) {
            const double t = engine.wrap_param(rule.nodes[k]);
            acc += rule.weights[k] * std::log((x - curve.point(t)).norm()) *
                   curve.parametric_speed(t);
        }
        single += solution.coefficients()[j] * acc;
    }
    double u = -single / (2.0 * M_PI);

    if (approach == Approach::direct) {
        const int n = engine.config().n_inner;
        const int p = engine.config().qi_degree;
        const QIRule unit_rule = qi_quadrature(QISpace(0.0, 1.0, p, n));
        double dl = 0.0;
        const int pieces = 4;
        for (const Cell& c : mesh.active_cells()) {
            const double w = (mesh.hi(c) - mesh.lo(c)) / pieces;
            for (int piece = 0; piece < pieces; ++piece) {
                const double lo = mesh.lo(c) + piece * w;
                for (int k = 0; k <= n; ++k) {
                    const double t = lo + w * unit_rule.space.nodes()[k];
                    const Point2 y = curve.point(t);
                    const Point2 d = y - x;
                    dl += w * unit_rule.weights[k] * curve.normal(t).dot(d) / d.squaredNorm() *
                          curve.parametric_speed(t) * u_D(y);
                }
            }
        }
        u += dl / (2.0 * M_PI);
    }
    return u;
}

}  // namespace igabem
