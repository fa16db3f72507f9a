#ifndef IGABEM_HIERARCHY_HPP
#define IGABEM_HIERARCHY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "igabem/splines.hpp"

namespace igabem {

/// Nested sequence of uniformly refined knot vectors sharing degree and
/// domain; level l halves every cell of level l-1 with simple new knots.
class LevelLadder {
public:
    explicit LevelLadder(KnotVector base);

    const KnotVector& base() const { return levels_[0]; }
    int degree() const { return base().degree(); }
    KnotKind kind() const { return base().kind(); }
    double a() const { return base().a(); }
    double b() const { return base().b(); }
    std::int64_t base_cells() const { return base_cells_; }

    std::int64_t cells(int level) const { return base_cells_ << level; }
    double cell_width(int level) const { return (b() - a()) / static_cast<double>(cells(level)); }
    /// The level-l knot vector (built on demand).
    const KnotVector& level(int l) const;

private:
    mutable std::vector<KnotVector> levels_;
    std::int64_t base_cells_;
};

/// Nested refinement regions: Gamma^l (l >= 1) is stored as the sorted list of
/// level-(l-1) cell indices whose union forms it; Gamma^0 = [a, b] implicitly
/// and Gamma^{M} is empty.
struct SubdomainHierarchy {
    std::vector<std::vector<std::int64_t>> parent_cells;  // entry l-1 describes Gamma^l

    int max_level() const { return static_cast<int>(parent_cells.size()) + 1; }
    /// Is the level-l cell `cell` contained in Gamma^{l+1}?  (integer test)
    bool refined(int l, std::int64_t cell) const;
    /// Is the level-l cell `cell` contained in Gamma^l?
    bool in_region(const LevelLadder& ladder, int l, std::int64_t cell) const;
    void validate(const LevelLadder& ladder) const;
};

struct Cell {
    int level = 0;
    std::int64_t index = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

class HierarchicalMesh {
public:
    HierarchicalMesh(LevelLadder ladder, std::vector<Cell> active);

    const LevelLadder& ladder() const { return ladder_; }
    const std::vector<Cell>& active_cells() const { return active_; }
    std::int64_t size() const { return static_cast<std::int64_t>(active_.size()); }
    double lo(const Cell& c) const { return ladder_.a() + c.index * ladder_.cell_width(c.level); }
    double hi(const Cell& c) const { return ladder_.a() + (c.index + 1) * ladder_.cell_width(c.level); }
    int deepest_level() const;
    /// Index into active_cells() of the active cell containing parameter t
    /// (t in [a, b); b wraps to the last cell for open, first for periodic).
    std::size_t cell_at(double t) const;

private:
    LevelLadder ladder_;
    std::vector<Cell> active_;  // sorted by parametric position
};

/// One member of the hierarchical basis. For periodic ladders the function is
/// the merged pair of the level's footnote construction; its support is the
/// contiguous window [lo, hi] in unrolled coordinates (hi may exceed b, in
/// which case the tail wraps to the start of the domain).
struct HierarchicalFunction {
    int level = 0;
    int index_in_level = 0;   // unmerged index for open, merged index for periodic
    double lo = 0.0;
    double hi = 0.0;
    bool wraps = false;
    std::int64_t grid_lo = 0;         // lo = a + grid_lo * h_level
    std::vector<double> local_knots;  // the d+2 knots of the function, unrolled
};

class HierarchicalBasis {
public:
    HierarchicalBasis(LevelLadder ladder, std::vector<HierarchicalFunction> functions);

    const LevelLadder& ladder() const { return ladder_; }
    const std::vector<HierarchicalFunction>& functions() const { return functions_; }
    std::int64_t size() const { return static_cast<std::int64_t>(functions_.size()); }
    const HierarchicalFunction& function(std::int64_t i) const { return functions_[i]; }

    /// B_i^H(t) for t in [a, b].
    double eval(std::int64_t i, double t) const;
    double eval_derivative(std::int64_t i, double t, int order) const;
    /// Indices of basis functions whose support contains t (wrap-aware).
    std::vector<std::int64_t> functions_at(double t) const;

private:
    LevelLadder ladder_;
    std::vector<HierarchicalFunction> functions_;
};

/// Active cells and hierarchical basis for the given refinement regions.
std::pair<HierarchicalMesh, HierarchicalBasis> build_hierarchy(
    const LevelLadder& ladder, const SubdomainHierarchy& regions);

/// Adds the closures of the marked active cells to the next-level region;
/// grows the hierarchy depth when the deepest level is marked.
SubdomainHierarchy refine(const SubdomainHierarchy& regions, const HierarchicalMesh& mesh,
                          std::span<const Cell> marked);

/// Refinement regions of the trivial one-level hierarchy.
SubdomainHierarchy trivial_regions();

struct PhysicalCell {
    Cell cell;
    double t0 = 0.0;
    double t1 = 0.0;
    double arc_length = 0.0;
};

/// Physical image of the hierarchical mesh with per-cell arc lengths.
std::vector<PhysicalCell> cell_geometry(const HierarchicalMesh& mesh, const SplineCurve& curve);

/// JSON serialization of the mesh (schema documented in the README).
std::string mesh_to_json(const HierarchicalMesh& mesh, const SubdomainHierarchy& regions);

}  // namespace igabem

#endif
