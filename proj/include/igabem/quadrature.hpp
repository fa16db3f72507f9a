#ifndef IGABEM_QUADRATURE_HPP
#define IGABEM_QUADRATURE_HPP

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "igabem/hierarchy.hpp"
#include "igabem/quasi_interp.hpp"
#include "igabem/splines.hpp"

namespace igabem {

struct QuadConfig {
    int n_inner = 12;
    int n_outer = 12;
    int qi_degree = 2;  // p
    bool extended_precision_moments = false;
};

/// Splitting U(F(s), F(t)) = K1(s, t) + K2(s, t) with K2 = log delta. The
/// geometry-free constructor supports the kernel-only rules (K1 and speeds
/// then throw).
class KernelSplit {
public:
    explicit KernelSplit(const SplineCurve& curve);
    KernelSplit(double a, double b, KnotKind kind);

    bool closed() const { return kind_ == KnotKind::periodic; }
    double domain_a() const { return a_; }
    double domain_b() const { return b_; }
    double gamma() const { return b_ - a_; }
    const SplineCurve& curve() const;
    bool has_curve() const { return curve_ != nullptr; }

    double delta(double s, double t) const;
    /// K1 with Taylor-safe branches at the diagonal (and the wrap corner of
    /// closed curves); total on [a,b]^2.
    double K1(double s, double t) const;
    /// Same with precomputed curve points (hot assembly path).
    double K1_points(double s, double t, const Point2& Fs, const Point2& Ft) const;
    double K2(double s, double t) const { return std::log(delta(s, t)); }
    /// log ||F(s) - F(t)||, for regular configurations.
    double U(double s, double t) const;
    double speed(double t) const;

private:
    const SplineCurve* curve_ = nullptr;
    double a_ = 0.0, b_ = 1.0;
    KnotKind kind_ = KnotKind::open;
};

/// Exact position on the dyadic rational grid: t = a + (b-a) * num / den.
struct GridPos {
    std::int64_t num = 0;
    std::int64_t den = 0;
    bool exact() const { return den > 0; }
};

/// A basis function prepared for rule construction: uniform-by-level knot
/// window, unrolled support [lo, hi], and its integer grid descriptor.
struct SupportedBasis {
    double lo = 0.0, hi = 0.0;
    double h = 0.0;                   // knot spacing of the window
    bool wraps = false;               // support crosses the closed-curve seam
    std::int64_t grid_lo = 0;         // lo = a + (b-a) * grid_lo / grid_den
    std::int64_t grid_den = 0;
    std::vector<int> pattern;         // knot offsets relative to lo, in units of h
    std::vector<double> local_knots;  // unrolled knots (d+2 values)
    int degree = 0;

    int units() const { return pattern.back(); }
    double width() const { return hi - lo; }
};

/// Rule (Q2): 'weights . g(nodes)' integrates B_i * g over the support.
struct RegularRule {
    Vector nodes;    // unrolled parameters, ascending
    Vector weights;  // w^(i)
    double apply(const Vector& values) const { return weights.dot(values); }
};

/// Rule (Q3): 'weights . g(nodes)' integrates K2(s, .) * B_i * g.
struct SingularRule {
    Vector nodes;
    Vector weights;  // eta^(i)(s)
    bool unstable = false;
    double apply(const Vector& values) const { return weights.dot(values); }
};

namespace detail {

/// Pattern-level tables shared by every translate of a basis function:
/// QI coefficient map, product-space structure, Bernstein span tables, and
/// the scale-free regular weights.
struct ProductPattern {
    int degree_d = 0;
    int degree_p = 0;
    int n = 0;
    std::vector<int> rel_knots;

    KnotVector product_kv;           // normalized to [0, units]
    Matrix qi_matrix;                // (n+p) x (n+1)
    Matrix product_map;              // G: P x (n+p)
    Matrix weight_map;               // (Lambda^T G^T): (n+1) x P
    Vector regular_weights_norm;     // w / h
    // Bernstein tables: span q covers [breaks[q], breaks[q+1]] and holds a
    // (D+1) x P matrix of coefficients (column r = basis r on that span).
    std::vector<double> breaks;
    std::vector<Matrix> bernstein;

    ProductPattern(const std::vector<int>& pattern, int d, int p, int n);
    int dimension() const { return product_kv.count(); }
};

struct MomentResult {
    Vector mu;
    bool unstable = false;
};

/// Modified moments of all product-space basis functions against K2(s, .) on
/// the normalized support, where c_tilde = (s - lo)/h in unrolled coordinates.
/// gamma_units = (b-a)/h for closed kernels (ignored for open).
MomentResult modified_moments_normalized(const ProductPattern& pattern, double c_tilde, double h,
                                         bool closed, double gamma_units,
                                         bool extended_precision);

}  // namespace detail

/// Engine owning per-function rules, pattern tables, and the moment cache for
/// one (basis set, kernel, configuration) triple. Thread-safe for concurrent
/// read/assembly use.
class QuadratureEngine {
public:
    QuadratureEngine(std::vector<SupportedBasis> supports, const KernelSplit& split,
                     QuadConfig config);

    static std::vector<SupportedBasis> supports_from(const HierarchicalBasis& basis);
    static std::vector<SupportedBasis> supports_from(const KnotVector& uniform_kv);

    std::int64_t size() const { return static_cast<std::int64_t>(supports_.size()); }
    const SupportedBasis& support(std::int64_t i) const { return supports_[i]; }
    const KernelSplit& split() const { return split_; }
    const QuadConfig& config() const { return config_; }

    const RegularRule& outer_rule(std::int64_t i) const { return outer_[i]; }
    const RegularRule& inner_rule(std::int64_t i) const { return inner_[i]; }

    /// eta^(j)(s) for an arbitrary source point.
    SingularRule singular_rule(std::int64_t j, double s) const;
    /// Same, with s given exactly on the dyadic grid (bit-stable cache reuse).
    SingularRule singular_rule(std::int64_t j, const GridPos& s) const;

    /// Modified moment vector mu^(j)(s) (inner-rule product space).
    Vector modified_moments(std::int64_t j, double s, bool* unstable = nullptr) const;

    /// Unrolled periodic-aware distance from s to the support of j.
    double support_distance(std::int64_t j, double s) const;
    /// Nearly-singular threshold: one support width.
    bool is_singular_or_near(std::int64_t j, double s) const;
    /// Same threshold decided in exact grid arithmetic when available.
    bool classify_singular(std::int64_t j, double s, const GridPos& pos) const;
    /// Canonical period reduction of a source into the support frame of j
    /// (number of periods, closed curves only).
    double source_shift(std::int64_t j, double s) const;
    /// Period reduction between two support frames (used per pair).
    double pair_shift(std::int64_t i, std::int64_t j) const;
    double inner_K2_shifted(std::int64_t j, double s, const GridPos& pos, double m) const;

    /// inner integral of K2(s,.) B_j J over D_j, classified.
    double inner_K2(std::int64_t j, double s, const GridPos& pos = {}) const;
    /// inner integral of the full kernel U(s,.) B_j J over D_j.
    double inner_U(std::int64_t j, double s) const;
    /// Same with the source point F(s) precomputed (hot evaluation path).
    double inner_U_from(std::int64_t j, double s, const Point2& Fs) const;

    double assemble_IK1(std::int64_t i, std::int64_t j) const;
    double assemble_IK2(std::int64_t i, std::int64_t j) const;
    double matrix_entry(std::int64_t i, std::int64_t j) const;

    /// Quadrature of B_i * g over the support of i via the outer rule; g is
    /// evaluated at wrapped parameters.
    double apply_outer(std::int64_t i, const std::function<double(double)>& g) const;

    GridPos outer_node_pos(std::int64_t i, int k) const;
    double wrap_param(double t) const;
    const Vector& inner_speeds(std::int64_t j) const { return inner_speed_[j]; }
    const Vector& outer_speeds(std::int64_t i) const { return outer_speed_[i]; }

    bool any_unstable_moments() const { return unstable_seen_; }

private:
    struct PatternKey {
        std::vector<int> rel_knots;
        int n = 0, p = 0;
        bool operator==(const PatternKey&) const = default;
    };
    struct PatternKeyHash {
        std::size_t operator()(const PatternKey& k) const;
    };

    const detail::ProductPattern& pattern_for(const SupportedBasis& sb, int n) const;
    const detail::MomentResult& moments_for(std::int64_t j, double c_tilde) const;
    double c_tilde_for(std::int64_t j, double s, const GridPos& pos) const;
    SingularRule singular_rule_impl(std::int64_t j, double s, const GridPos& pos) const;

    std::vector<SupportedBasis> supports_;
    KernelSplit split_;
    QuadConfig config_;

    mutable std::unordered_map<PatternKey, std::unique_ptr<detail::ProductPattern>, PatternKeyHash>
        patterns_;
    mutable std::mutex pattern_mutex_;

    std::vector<const detail::ProductPattern*> inner_pattern_;
    std::vector<const detail::ProductPattern*> outer_pattern_;
    std::vector<RegularRule> inner_, outer_;
    std::vector<Vector> inner_speed_, outer_speed_;
    std::vector<Eigen::Matrix2Xd> inner_points_, outer_points_;

    struct MomentKey {
        const void* pattern;
        std::uint64_t c_bits;
        std::int64_t den;
        bool operator==(const MomentKey&) const = default;
    };
    struct MomentKeyHash {
        std::size_t operator()(const MomentKey& k) const;
    };
    static constexpr int kShards = 16;
    mutable std::array<std::unordered_map<MomentKey, detail::MomentResult, MomentKeyHash>, kShards>
        moment_cache_;
    mutable std::array<std::mutex, kShards> moment_mutex_;
    mutable std::atomic<bool> unstable_seen_ = false;
};

}  // namespace igabem

#endif
