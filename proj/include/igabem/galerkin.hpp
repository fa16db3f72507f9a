#ifndef IGABEM_GALERKIN_HPP
#define IGABEM_GALERKIN_HPP

#include <functional>
#include <optional>

#include "igabem/hierarchy.hpp"
#include "igabem/quadrature.hpp"

namespace igabem {

/// Boundary datum as a function of the physical point.
using BoundaryDatum = std::function<double(const Point2&)>;

/// Discrete Symm system: the raw Galerkin matrix A (entries I^(i,j)), the
/// right-hand side, and the -1/(2 pi) scale applied on the left when solving.
struct GalerkinSystem {
    Matrix A;
    Vector rhs;
    double scale = -1.0 / (2.0 * M_PI);
    double pre_symmetry_residual = 0.0;  // max |A - A^T| / max |A| before averaging
    bool negated = false;                // solve factored -scale*A instead
};

/// Dense assembly of A, symmetrized by averaging; the pre-symmetrization
/// residual is recorded for diagnostics.
Matrix assemble_matrix(const QuadratureEngine& engine, double* pre_symmetry_residual = nullptr);

/// beta_1 entries: integral of u_D (B_i o F^{-1}) over Gamma, via the outer
/// rule with auxiliary g = J * (u_D o F).
Vector assemble_rhs_indirect(const QuadratureEngine& engine, const BoundaryDatum& u_D);

/// Double-layer kernel dU/dn_y(F(s), F(t)), with the curvature limit on the
/// diagonal (Taylor-safe for nearly coincident parameters).
double double_layer_kernel(const SplineCurve& curve, double s, double t);

/// Inner double-layer integral over all active cells at source parameter s,
/// by the per-cell base quadrature with diagonal-adjacent subdivision.
double double_layer_integral(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                             const BoundaryDatum& u_D, double s, int subdivisions = 1);

/// beta = 1/2 beta_1 - 1/(2 pi) beta_2 for the direct (interior) approach.
Vector assemble_rhs_direct(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                           const BoundaryDatum& u_D);
/// beta_2 alone (nested regular rules on the double-layer kernel).
Vector assemble_rhs_double_layer(const QuadratureEngine& engine, const HierarchicalMesh& mesh,
                                 const BoundaryDatum& u_D);

/// Density solution phi_h = sum alpha_j B_j^H o F^{-1}.
class DensitySolution {
public:
    DensitySolution() = default;
    DensitySolution(Vector alpha, const HierarchicalBasis* basis, const SplineCurve* curve)
        : alpha_(std::move(alpha)), basis_(basis), curve_(curve) {}

    const Vector& coefficients() const { return alpha_; }
    const HierarchicalBasis& basis() const { return *basis_; }
    const SplineCurve& curve() const { return *curve_; }
    /// phi_h(F(t)).
    double eval_param(double t) const;

private:
    Vector alpha_;
    const HierarchicalBasis* basis_ = nullptr;
    const SplineCurve* curve_ = nullptr;
};

struct SolveReport {
    bool negated = false;
    bool indefinite = false;      // fell back to LDLT
    double min_eigenvalue = 0.0;  // of the scaled operator, when indefinite
    double residual = 0.0;        // ||S alpha - beta|| / ||beta||
};

/// Cholesky solve of (-1/(2 pi)) A alpha = beta with one step of iterative
/// refinement. When the scaled operator is not definite either way (boundaries
/// of logarithmic capacity >= 1), falls back to a symmetric indefinite LDLT
/// factorization and records the smallest-eigenvalue estimate.
Vector solve_system(GalerkinSystem& system, SolveReport* report = nullptr);

/// Energy of the discrete solution: alpha . beta_1.
double energy_norm_sq(const DensitySolution& solution, const Vector& beta1);

/// Single-layer value V phi_h(F(s)).
double eval_Vphi(const DensitySolution& solution, const QuadratureEngine& engine, double s);

enum class Approach { indirect, direct };

/// Representation-formula evaluation of u at an interior point; the direct
/// approach adds the double-layer term of the Dirichlet datum.
double evaluate_potential(const DensitySolution& solution, const QuadratureEngine& engine,
                          const HierarchicalMesh& mesh, const BoundaryDatum& u_D, Approach approach,
                          const Point2& x, double min_distance = 1e-3);

}  // namespace igabem

#endif
