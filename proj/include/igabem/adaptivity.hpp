#ifndef IGABEM_ADAPTIVITY_HPP
#define IGABEM_ADAPTIVITY_HPP

#include <functional>
#include <optional>

#include "igabem/problems.hpp"

namespace igabem {

/// Overlapping patch of a cell: the union of closures of active cells
/// touching it (wrapping across the seam of closed curves).
struct Patch {
    std::size_t cell_index = 0;              // into mesh.active_cells()
    std::vector<std::size_t> members;        // neighbours + the cell itself
    /// parametric intervals of the members (1-3; split at the seam)
    std::vector<std::pair<double, double>> intervals;
};

Patch build_patch(const HierarchicalMesh& mesh, std::size_t cell_index);

/// Residual R_h(F(s)) = f(s) - V phi_h(F(s)).
class ResidualEvaluator {
public:
    ResidualEvaluator(const ProblemDefinition& problem, const DensitySolution& solution,
                      const QuadratureEngine& engine)
        : problem_(&problem), solution_(&solution), engine_(&engine) {}

    double operator()(double s) const;

private:
    const ProblemDefinition* problem_;
    const DensitySolution* solution_;
    const QuadratureEngine* engine_;
};

/// Slobodeckij seminorm |R|^2_{H^{1/2}} over the patch domain: tensor Gauss
/// per cell pair with staggered node sets (q on x, q+1 on y).
double patch_seminorm_sq(const SplineCurve& curve, const Patch& patch,
                         const std::function<double(double)>& residual, int q = 8);

struct EstimatorReport {
    Vector eta_sq;            // per active cell, aligned with mesh.active_cells()
    double eta_global = 0.0;  // sqrt(sum eta_sq)
};

EstimatorReport estimate(const HierarchicalMesh& mesh, const ProblemDefinition& problem,
                         const DensitySolution& solution, const QuadratureEngine& engine,
                         int q = 8);

/// How the marking inequality aggregates the per-cell values. `printed`
/// follows the marking inequality as written (global eta on the left, linear
/// cell sums on the right); the alternatives are the common literature forms.
enum class DorflerSum { printed, pure_linear, squared };

std::vector<Cell> mark(const HierarchicalMesh& mesh, const EstimatorReport& report, double theta,
                       DorflerSum convention = DorflerSum::printed);

struct AdaptiveParams {
    double theta = 0.5;
    int max_iter = 10;
    std::int64_t target_dof = 0;  // 0: no DOF stop
    DorflerSum convention = DorflerSum::printed;
    QuadConfig quad;
    bool uniform = false;  // refine every active cell instead of marking
    int seminorm_nodes = 8;
};

struct AdaptiveState {
    int iteration = 0;
    std::int64_t n_dof = 0;
    double eta = 0.0;
    std::optional<double> error;
    std::int64_t marked_count = 0;
    int deepest_level = 0;
    std::vector<Cell> marked;
    Vector eta_sq;
    std::shared_ptr<const HierarchicalMesh> mesh;
    std::shared_ptr<const SubdomainHierarchy> regions;
    Vector alpha;
    SolveReport solve;
};

/// Solve -> estimate -> mark -> refine until max_iter or the DOF target.
std::vector<AdaptiveState> adaptive_loop(const ProblemDefinition& problem,
                                         const AdaptiveParams& params);

}  // namespace igabem

#endif
