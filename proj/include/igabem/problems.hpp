#ifndef IGABEM_PROBLEMS_HPP
#define IGABEM_PROBLEMS_HPP

#include <memory>
#include <optional>
#include <string>

#include "igabem/galerkin.hpp"
#include "igabem/hierarchy.hpp"

namespace igabem {

enum class ErrorNorm { energy, l2 };

struct ReferenceParams {
    double theta = 0.5;
    int n_inner = 12;
    int n_outer = 12;
    int qi_degree = 2;
    int max_iter = 10;
};

/// A boundary-value problem ready for the adaptive solver: geometry, Cauchy
/// data, optional exact solutions, and the reference run parameters.
struct ProblemDefinition {
    std::string name;
    std::shared_ptr<const SplineCurve> curve;
    Approach approach = Approach::indirect;
    ErrorNorm norm = ErrorNorm::energy;
    BoundaryDatum dirichlet;
    /// Right-hand side of the Symm equation at F(s): u_D for the indirect
    /// approach, the second-BIE right side for the direct one (fixed fine
    /// composite quadrature on the double-layer term).
    std::function<double(double)> rhs_param;
    /// phi(F(t)) when known.
    std::function<double(double)> exact_phi;
    /// u at interior points when known.
    std::function<double(const Point2&)> exact_u;
    std::optional<double> exact_energy_sq;
    ReferenceParams reference;

    bool has_exact_phi() const { return static_cast<bool>(exact_phi); }
};

/// Crack problem on the slit [-1,1] x {0} (indirect, energy norm).
ProblemDefinition problem_slit();
/// Pac-Man-like smooth sector (direct, L2 norm, cubic geometry).
ProblemDefinition problem_pacman();
/// Smooth L-shaped domain (direct, L2 norm, cubic geometry).
ProblemDefinition problem_lshape();

/// Problem from a JSON definition file (schema in the README); built-in names
/// resolve through the three constructors above.
ProblemDefinition load_problem(const std::string& name_or_path);

/// ||phi - phi_h||_{L2(Gamma)} by composite Gauss over active cells.
double l2_error(const DensitySolution& solution, const ProblemDefinition& problem,
                const HierarchicalMesh& mesh, int nodes_per_cell = 16);

/// sqrt(max(0, |||phi|||^2 - alpha . beta1)).
double energy_error(double exact_energy_sq, double discrete_energy_sq);

}  // namespace igabem

#endif
