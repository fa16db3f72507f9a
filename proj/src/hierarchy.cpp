#include "igabem/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "igabem/gauss.hpp"

namespace igabem {

LevelLadder::LevelLadder(KnotVector base) {
    const auto part = base.breakpoints();
    const int cells = static_cast<int>(part.breakpoints.size()) - 1;
    const double h = (base.b() - base.a()) / cells;
    for (int q = 0; q < cells; ++q) {
        if (std::abs(part.breakpoints[q + 1] - part.breakpoints[q] - h) > 1e-10 * (base.b() - base.a()))
            throw std::invalid_argument("LevelLadder: base partition must be uniform");
    }
    for (int m : part.multiplicities)
        if (m != 1) throw std::invalid_argument("LevelLadder: base interior knots must be simple");
    base_cells_ = cells;
    levels_.push_back(std::move(base));
}

const KnotVector& LevelLadder::level(int l) const {
    if (l < 0) throw std::out_of_range("LevelLadder: negative level");
    while (static_cast<int>(levels_.size()) <= l) {
        const int next = static_cast<int>(levels_.size());
        const auto cells64 = base_cells_ << next;
        const int c = static_cast<int>(cells64);
        levels_.push_back(kind() == KnotKind::periodic
                              ? KnotVector::periodic_uniform(a(), b(), c, degree())
                              : KnotVector::open_uniform(a(), b(), c, degree()));
    }
    return levels_[l];
}

bool SubdomainHierarchy::refined(int l, std::int64_t cell) const {
    if (l >= static_cast<int>(parent_cells.size())) return false;
    const auto& list = parent_cells[l];
    return std::binary_search(list.begin(), list.end(), cell);
}

bool SubdomainHierarchy::in_region(const LevelLadder& ladder, int l, std::int64_t cell) const {
    if (cell < 0 || cell >= ladder.cells(l)) return false;
    if (l == 0) return true;
    return refined(l - 1, cell >> 1);
}

void SubdomainHierarchy::validate(const LevelLadder& ladder) const {
    for (std::size_t k = 0; k < parent_cells.size(); ++k) {
        const int l = static_cast<int>(k);  // parent_cells[k] holds level-l cells
        auto list = parent_cells[k];
        if (!std::is_sorted(list.begin(), list.end()))
            throw std::invalid_argument("SubdomainHierarchy: cell lists must be sorted");
        for (std::int64_t c : list) {
            if (c < 0 || c >= ladder.cells(l))
                throw std::invalid_argument("SubdomainHierarchy: cell index out of range");
            if (!in_region(ladder, l, c))
                throw std::invalid_argument("SubdomainHierarchy: regions are not nested");
        }
    }
}

HierarchicalMesh::HierarchicalMesh(LevelLadder ladder, std::vector<Cell> active)
    : ladder_(std::move(ladder)), active_(std::move(active)) {
    const int deepest = deepest_level();
    std::sort(active_.begin(), active_.end(), [&](const Cell& x, const Cell& y) {
        return (x.index << (deepest - x.level)) < (y.index << (deepest - y.level));
    });
    // Active cells tile [a, b].
    std::int64_t covered = 0;  // in units of the deepest-level cell
    for (const Cell& c : active_) {
        if ((c.index << (deepest - c.level)) != covered)
            throw std::invalid_argument("HierarchicalMesh: active cells do not tile the domain");
        covered += std::int64_t{1} << (deepest - c.level);
    }
    if (covered != ladder_.cells(deepest))
        throw std::invalid_argument("HierarchicalMesh: active cells do not cover the domain");
}

int HierarchicalMesh::deepest_level() const {
    int deepest = 0;
    for (const Cell& c : active_) deepest = std::max(deepest, c.level);
    return deepest;
}

std::size_t HierarchicalMesh::cell_at(double t) const {
    const double u = ladder_.kind() == KnotKind::periodic ? ladder_.base().wrap(t) : t;
    std::size_t lo = 0, hi = active_.size();
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (this->lo(active_[mid]) <= u)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

HierarchicalBasis::HierarchicalBasis(LevelLadder ladder, std::vector<HierarchicalFunction> functions)
    : ladder_(std::move(ladder)), functions_(std::move(functions)) {}

double HierarchicalBasis::eval(std::int64_t i, double t) const {
    const auto& f = functions_[i];
    double v = bspline_value_local(f.local_knots, t);
    if (f.wraps) v += bspline_value_local(f.local_knots, t + ladder_.b() - ladder_.a());
    return v;
}

double HierarchicalBasis::eval_derivative(std::int64_t i, double t, int order) const {
    const auto& f = functions_[i];
    double v = bspline_derivative_local(f.local_knots, t, order);
    if (f.wraps) v += bspline_derivative_local(f.local_knots, t + ladder_.b() - ladder_.a(), order);
    return v;
}

std::vector<std::int64_t> HierarchicalBasis::functions_at(double t) const {
    std::vector<std::int64_t> out;
    const double g = ladder_.b() - ladder_.a();
    for (std::int64_t i = 0; i < size(); ++i) {
        const auto& f = functions_[i];
        if ((t >= f.lo && t <= f.hi) || (f.wraps && t + g >= f.lo && t + g <= f.hi))
            out.push_back(i);
    }
    return out;
}

namespace {

// Level-l cells covered by function j, as canonical (mod-wrapped) indices,
// plus the unrolled grid start of the support window.
struct Coverage {
    std::vector<std::int64_t> cells;
    std::int64_t grid_lo = 0;
    int span_cells = 0;
};

Coverage function_coverage(const LevelLadder& ladder, int l, int j) {
    const int d = ladder.degree();
    const std::int64_t n_cells = ladder.cells(l);
    Coverage cov;
    if (ladder.kind() == KnotKind::periodic) {
        std::int64_t g0 = (j - d) % n_cells;
        if (g0 < 0) g0 += n_cells;
        cov.grid_lo = g0;
        cov.span_cells = d + 1;
        for (int k = 0; k < d + 1; ++k) cov.cells.push_back((g0 + k) % n_cells);
    } else {
        const KnotVector& kv = ladder.level(l);
        const auto grid = [&](int knot_index) {
            return std::clamp<std::int64_t>(knot_index - d, 0, n_cells);
        };
        cov.grid_lo = grid(j);
        cov.span_cells = static_cast<int>(grid(j + d + 1) - grid(j));
        (void)kv;
        for (std::int64_t c = cov.grid_lo; c < grid(j + d + 1); ++c) cov.cells.push_back(c);
    }
    return cov;
}

}  // namespace

std::pair<HierarchicalMesh, HierarchicalBasis> build_hierarchy(
    const LevelLadder& ladder, const SubdomainHierarchy& regions) {
    regions.validate(ladder);
    const int M = regions.max_level();
    const int d = ladder.degree();

    std::vector<Cell> active;
    for (int l = 0; l < M; ++l) {
        for (std::int64_t c = 0; c < ladder.cells(l); ++c)
            if (regions.in_region(ladder, l, c) && !regions.refined(l, c))
                active.push_back(Cell{l, c});
    }

    std::vector<HierarchicalFunction> functions;
    for (int l = 0; l < M; ++l) {
        const KnotVector& kv = ladder.level(l);
        const int n_funcs = kv.merged_count();
        const double h = ladder.cell_width(l);
        for (int j = 0; j < n_funcs; ++j) {
            const Coverage cov = function_coverage(ladder, l, j);
            bool inside = true;      // supp subset of Gamma^l
            bool all_finer = true;   // supp subset of Gamma^{l+1}
            for (std::int64_t c : cov.cells) {
                if (!regions.in_region(ladder, l, c)) inside = false;
                if (!regions.refined(l, c)) all_finer = false;
            }
            if (!inside || all_finer) continue;

            HierarchicalFunction f;
            f.level = l;
            f.index_in_level = j;
            f.grid_lo = cov.grid_lo;
            if (ladder.kind() == KnotKind::periodic) {
                f.lo = ladder.a() + cov.grid_lo * h;
                f.hi = ladder.a() + (cov.grid_lo + d + 1) * h;
                for (int k = 0; k <= d + 1; ++k)
                    f.local_knots.push_back(ladder.a() + (cov.grid_lo + k) * h);
                f.wraps = cov.grid_lo + d + 1 > ladder.cells(l);
            } else {
                for (int k = 0; k <= d + 1; ++k) f.local_knots.push_back(kv.knot(j + k));
                f.lo = f.local_knots.front();
                f.hi = f.local_knots.back();
                f.wraps = false;
            }
            functions.push_back(std::move(f));
        }
    }

    return {HierarchicalMesh(ladder, std::move(active)),
            HierarchicalBasis(ladder, std::move(functions))};
}

SubdomainHierarchy refine(const SubdomainHierarchy& regions, const HierarchicalMesh& mesh,
                          std::span<const Cell> marked) {
    for (const Cell& c : marked) {
        if (std::find(mesh.active_cells().begin(), mesh.active_cells().end(), c) ==
            mesh.active_cells().end())
            throw std::invalid_argument("refine: marked cell is not active");
    }
    SubdomainHierarchy out = regions;
    for (const Cell& c : marked) {
        if (static_cast<int>(out.parent_cells.size()) <= c.level)
            out.parent_cells.resize(c.level + 1);
        out.parent_cells[c.level].push_back(c.index);
    }
    for (auto& list : out.parent_cells) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return out;
}

SubdomainHierarchy trivial_regions() { return SubdomainHierarchy{}; }

std::vector<PhysicalCell> cell_geometry(const HierarchicalMesh& mesh, const SplineCurve& curve) {
    if (std::abs(curve.a() - mesh.ladder().a()) > 1e-12 ||
        std::abs(curve.b() - mesh.ladder().b()) > 1e-12)
        throw std::invalid_argument("cell_geometry: curve domain must equal mesh domain");
    std::vector<PhysicalCell> cells;
    cells.reserve(mesh.active_cells().size());
    for (const Cell& c : mesh.active_cells()) {
        PhysicalCell pc;
        pc.cell = c;
        pc.t0 = mesh.lo(c);
        pc.t1 = mesh.hi(c);
        pc.arc_length = gauss_integrate(16, pc.t0, pc.t1,
                                        [&](double t) { return curve.parametric_speed(t); });
        cells.push_back(pc);
    }
    return cells;
}

std::string mesh_to_json(const HierarchicalMesh& mesh, const SubdomainHierarchy& regions) {
    nlohmann::json j;
    j["domain"] = {mesh.ladder().a(), mesh.ladder().b()};
    j["degree"] = mesh.ladder().degree();
    j["kind"] = mesh.ladder().kind() == KnotKind::periodic ? "periodic" : "open";
    j["base_cells"] = mesh.ladder().base_cells();
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t k = 0; k < regions.parent_cells.size(); ++k) {
        nlohmann::json entry;
        entry["level"] = k + 1;
        entry["parent_cells"] = regions.parent_cells[k];
        levels.push_back(entry);
    }
    j["regions"] = levels;
    nlohmann::json active = nlohmann::json::array();
    for (const Cell& c : mesh.active_cells()) active.push_back({{"level", c.level}, {"index", c.index}});
    j["active_cells"] = active;
    return j.dump(2);
}

}  // namespace igabem
