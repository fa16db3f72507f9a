#include "igabem/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "igabem/gauss.hpp"

namespace igabem {

// ---------------------------------------------------------------------------
// KernelSplit
// ---------------------------------------------------------------------------

KernelSplit::KernelSplit(const SplineCurve& curve)
    : curve_(&curve),
      a_(curve.a()),
      b_(curve.b()),
      kind_(curve.closed() ? KnotKind::periodic : KnotKind::open) {}

KernelSplit::KernelSplit(double a, double b, KnotKind kind) : a_(a), b_(b), kind_(kind) {
    if (!(a < b)) throw std::invalid_argument("KernelSplit: empty domain");
}

const SplineCurve& KernelSplit::curve() const {
    if (!curve_) throw std::logic_error("KernelSplit: no curve attached");
    return *curve_;
}

double KernelSplit::delta(double s, double t) const {
    const double d = std::abs(s - t);
    if (!closed()) return d;
    const double g = gamma();
    return d * std::abs((s - t) * (s - t) - g * g) / (g * g);
}

double KernelSplit::speed(double t) const { return curve().parametric_speed(t); }

double KernelSplit::U(double s, double t) const {
    return std::log((curve().point(s) - curve().point(t)).norm());
}

namespace {

// ||F(s)-F(t)||^2 / (t-s)^2 expanded around the midpoint; valid for small
// |t - s| (with t possibly unrolled past the domain ends of a closed curve).
double ratio_sq_taylor(const SplineCurve& curve, double s, double t) {
    const double m = 0.5 * (s + t);
    const double diff = t - s;
    const Point2 d1 = curve.derivative(m, 1);
    const Point2 d3 = curve.derivative(m, 3);
    return d1.squaredNorm() + diff * diff * d1.dot(d3) / 12.0;
}

}  // namespace

double KernelSplit::K1(double s, double t) const {
    return K1_points(s, t, curve().point(s), curve().point(t));
}

double KernelSplit::K1_points(double s, double t, const Point2& Fs, const Point2& Ft) const {
    const double tau = 1e-7 * gamma();
    const double diff = t - s;
    if (!closed()) {
        if (std::abs(diff) < tau) return 0.5 * std::log(ratio_sq_taylor(curve(), s, t));
        return 0.5 * std::log((Fs - Ft).squaredNorm() / (diff * diff));
    }
    // Closed curves accept unrolled arguments (|t - s| < 2 gamma): delta has
    // factors diff, diff -+ gamma; the one nearest zero gets the Taylor-safe
    // treatment, the others are evaluated directly.
    const double g = gamma();
    const double m = std::round(diff / g);
    const double reduced = diff - m * g;
    if (std::abs(reduced) < tau) {
        const double rho = ratio_sq_taylor(curve(), s, t - m * g);  // ~ dist2 / reduced^2
        double others;  // product of the two non-vanishing delta factors / gamma^2
        if (m == 0.0)
            others = std::abs((diff - g) * (diff + g)) / (g * g);
        else if (m == 1.0)
            others = std::abs(diff * (diff + g)) / (g * g);
        else
            others = std::abs(diff * (diff - g)) / (g * g);
        return 0.5 * std::log(rho) - std::log(others);
    }
    const double dist2 = (Fs - Ft).squaredNorm();
    const double d = delta(s, t);
    return 0.5 * std::log(dist2 / (d * d));
}

// ---------------------------------------------------------------------------
// Pattern tables
// ---------------------------------------------------------------------------

namespace detail {

namespace {

// Bernstein -> power basis in u on [0, 1], and its inverse; cached per degree.
const Matrix& bernstein_to_power(int D) {
    static std::unordered_map<int, Matrix> cache;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto it = cache.find(D);
    if (it == cache.end()) {
        Matrix M = Matrix::Zero(D + 1, D + 1);
        auto binom = [](int nn, int kk) {
            double r = 1.0;
            for (int i = 1; i <= kk; ++i) r = r * (nn - kk + i) / i;
            return r;
        };
        for (int j = 0; j <= D; ++j)
            for (int m = j; m <= D; ++m)
                M(m, j) = binom(D, j) * binom(D - j, m - j) * ((m - j) % 2 ? -1.0 : 1.0);
        it = cache.emplace(D, std::move(M)).first;
    }
    return it->second;
}

const Matrix& power_to_bernstein(int D) {
    static std::unordered_map<int, Matrix> cache;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto it = cache.find(D);
    if (it == cache.end())
        it = cache.emplace(D, bernstein_to_power(D).inverse().eval()).first;
    return it->second;
}

}  // namespace

ProductPattern::ProductPattern(const std::vector<int>& pattern, int d, int p, int n)
    : degree_d(d),
      degree_p(p),
      n(n),
      rel_knots(pattern),
      product_kv(KnotVector::open_uniform(0, 1, 1, 0)) {  // placeholder, rebuilt below
    const int units = pattern.back();

    // The basis function as a spline on the clamped space over [0, units].
    std::vector<double> bknots;
    for (int k = 0; k <= d; ++k) bknots.push_back(0.0);
    for (int v : pattern)
        if (v > 0 && v < units) bknots.push_back(v);
    for (int k = 0; k <= d; ++k) bknots.push_back(static_cast<double>(units));
    KnotVector kvB(std::move(bknots), d, KnotKind::open);

    std::vector<double> window(pattern.begin(), pattern.end());
    Vector bcoeffs = deboor_fix_coefficients(kvB, [&](double t, int nder, double* out) {
        for (int k = 0; k <= nder; ++k)
            out[k] = k <= d ? bspline_derivative_local(window, t, k) : 0.0;
    });
    SplineFunction bfun(kvB, bcoeffs);

    const QISpace qspace(0.0, static_cast<double>(units), p, n);
    qi_matrix = qi_coefficient_matrix(qspace);
    const KnotVector qkv = qspace.knots();

    product_kv = product_knot_vector(kvB, qkv);
    const int P = product_kv.count();
    const int qdim = qkv.count();

    product_map = Matrix::Zero(P, qdim);
    for (int j = 0; j < qdim; ++j) {
        Vector unit = Vector::Zero(qdim);
        unit[j] = 1.0;
        SplineFunction qj(qkv, unit);
        Vector col = deboor_fix_coefficients(product_kv, [&](double t, int nder, double* out) {
            double fd[12] = {0}, gd[12] = {0};
            bfun.derivatives(t, std::min(nder, d), fd);
            qj.derivatives(t, std::min(nder, p), gd);
            for (int r = 0; r <= nder; ++r) {
                double sum = 0.0, binom = 1.0;
                for (int i = 0; i <= r; ++i) {
                    if (i <= d && r - i <= p) sum += binom * fd[i] * gd[r - i];
                    binom = binom * (r - i) / (i + 1);
                }
                out[r] = sum;
            }
        });
        product_map.col(j) = col;
    }

    Vector integrals(P);
    for (int r = 0; r < P; ++r) integrals[r] = integrate_basis(product_kv, r);
    weight_map = qi_matrix.transpose() * product_map.transpose();  // (n+1) x P
    regular_weights_norm = weight_map * integrals;

    // Per-span Bernstein tables: the D+1 nonzero basis functions on each span
    // are polynomials there, so midpoint derivatives convert exactly to
    // Bernstein form through small fixed transforms.
    const int D = d + p;
    const auto part = product_kv.breakpoints();
    breaks = part.breakpoints;
    const int nspan = static_cast<int>(breaks.size()) - 1;
    bernstein.assign(nspan, Matrix::Zero(D + 1, P));
    const Matrix& to_bernstein = power_to_bernstein(D);
    for (int q = 0; q < nspan; ++q) {
        const double x1 = breaks[q], x2 = breaks[q + 1];
        const double w = x2 - x1, mid = 0.5 * (x1 + x2);
        const int sp = product_kv.find_span(mid);
        const Matrix ders = basis_ders(product_kv, sp, mid, D);
        Vector beta(D + 1);
        for (int c = 0; c <= D; ++c) {
            const int r = sp - D + c;
            // derivatives at mid -> u-powers on [x1, x2] (u_mid = 1/2)
            double fact = 1.0, wpow = 1.0;
            Vector a(D + 1);
            for (int k = 0; k <= D; ++k) {
                a[k] = ders(k, c) / fact * wpow;
                fact *= k + 1;
                wpow *= w;
            }
            for (int m = 0; m <= D; ++m) {
                double sum = 0.0, binom = 1.0, half = 1.0;
                for (int k = m; k <= D; ++k) {
                    sum += a[k] * binom * half;
                    binom = binom * (k + 1) / (k + 1 - m);
                    half *= -0.5;
                }
                beta[m] = sum;
            }
            bernstein[q].col(r) = to_bernstein * beta;
        }
    }
}

namespace {

// antiderivative of z^j log|z|: z^{j+1}/(j+1) (log|z| - 1/(j+1)), zero at z = 0.
template <typename Scalar>
Scalar log_primitive(Scalar z, int j) {
    if (z == Scalar(0)) return Scalar(0);
    Scalar zp = z;
    for (int k = 0; k < j; ++k) zp *= z;
    return zp / Scalar(j + 1) * (std::log(std::abs(z)) - Scalar(1) / Scalar(j + 1));
}

// integral over [x1, x2] of p(xi) log|xi - c| dxi for p given in Bernstein
// form; closed form via a Taylor shift to the singular center.
template <typename Scalar>
Scalar span_log_integral_near(const Eigen::Ref<const Vector>& bern, double x1, double x2,
                              double c) {
    const int D = static_cast<int>(bern.size()) - 1;
    const Matrix& M = bernstein_to_power(D);
    const Scalar w = Scalar(x2) - Scalar(x1);

    // power coefficients in u, then shift to u_c = (c - x1)/w
    Scalar beta[16];
    for (int m = 0; m <= D; ++m) {
        Scalar sum = 0;
        for (int j = 0; j <= D; ++j) sum += Scalar(M(m, j)) * Scalar(bern[j]);
        beta[m] = sum;
    }
    const Scalar uc = (Scalar(c) - Scalar(x1)) / w;
    for (int m = 0; m <= D - 1; ++m)
        for (int j = D - 1; j >= m; --j) beta[j] += uc * beta[j + 1];

    Scalar result = 0;
    const Scalar z2 = Scalar(x2) - Scalar(c), z1 = Scalar(x1) - Scalar(c);
    Scalar wpow = 1;
    for (int m = 0; m <= D; ++m) {
        const Scalar am = beta[m] / wpow;
        result += am * (log_primitive(z2, m) - log_primitive(z1, m));
        wpow *= w;
    }
    return result;
}

double de_casteljau(const Eigen::Ref<const Vector>& bern, double u) {
    const int D = static_cast<int>(bern.size()) - 1;
    double b[16];
    for (int j = 0; j <= D; ++j) b[j] = bern[j];
    for (int r = 1; r <= D; ++r)
        for (int j = 0; j <= D - r; ++j) b[j] = (1 - u) * b[j] + u * b[j + 1];
    return b[0];
}

// Far centers: the log factor is smooth on the span, where the closed form
// would cancel catastrophically; high-order Gauss is exact to rounding here.
double span_log_integral_far(const Eigen::Ref<const Vector>& bern, double x1, double x2,
                             double c) {
    const GaussRule& rule = gauss_legendre(24);
    const double mid = 0.5 * (x1 + x2), half = 0.5 * (x2 - x1);
    double sum = 0.0;
    for (int k = 0; k < rule.size(); ++k) {
        const double xi = mid + half * rule.nodes[k];
        const double u = (xi - x1) / (x2 - x1);
        sum += rule.weights[k] * de_casteljau(bern, u) * std::log(std::abs(xi - c));
    }
    return half * sum;
}

template <typename Scalar>
double span_log_integral(const Eigen::Ref<const Vector>& bern, double x1, double x2, double c) {
    const double width = x2 - x1;
    const double dist = std::max({x1 - c, c - x2, 0.0});
    if (dist > 2.0 * width) return span_log_integral_far(bern, x1, x2, c);
    return static_cast<double>(span_log_integral_near<Scalar>(bern, x1, x2, c));
}

}  // namespace

MomentResult modified_moments_normalized(const ProductPattern& pattern, double c_tilde, double h,
                                         bool closed, double gamma_units,
                                         bool extended_precision) {
    const int P = pattern.dimension();
    const int D = pattern.degree_d + pattern.degree_p;
    const double log_h = std::log(h);
    const double const_term =
        closed ? 3.0 * log_h - 2.0 * std::log(gamma_units * h) : log_h;

    MomentResult out;
    out.mu = Vector::Zero(P);
    const int nspan = static_cast<int>(pattern.breaks.size()) - 1;

    Vector abs_sum = Vector::Zero(P);
    Vector comp = Vector::Zero(P);  // Neumaier compensation

    auto accumulate = [&](int r, double term) {
        const double t = out.mu[r] + term;
        if (std::abs(out.mu[r]) >= std::abs(term))
            comp[r] += (out.mu[r] - t) + term;
        else
            comp[r] += (term - t) + out.mu[r];
        out.mu[r] = t;
        abs_sum[r] += std::abs(term);
    };

    // Everything lives in unrolled coordinates, where log delta splits into
    // log factors centered at c and (closed case) c -+ gamma, uniformly over
    // the support.
    double centers[3];
    int ncenters = 1;
    centers[0] = c_tilde;
    if (closed) {
        centers[1] = c_tilde - gamma_units;
        centers[2] = c_tilde + gamma_units;
        ncenters = 3;
    }

    for (int q = 0; q < nspan; ++q) {
        const double x1 = pattern.breaks[q], x2 = pattern.breaks[q + 1];
        const Matrix& B = pattern.bernstein[q];
        for (int r = 0; r < P; ++r) {
            if (B.col(r).isZero(0.0)) continue;
            const double plain = (x2 - x1) / (D + 1) * B.col(r).sum();
            accumulate(r, const_term * plain);
            for (int cidx = 0; cidx < ncenters; ++cidx) {
                const double val =
                    extended_precision
                        ? span_log_integral<long double>(B.col(r), x1, x2, centers[cidx])
                        : span_log_integral<double>(B.col(r), x1, x2, centers[cidx]);
                accumulate(r, val);
            }
        }
    }

    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int r = 0; r < P; ++r) {
        out.mu[r] += comp[r];
        out.mu[r] *= h;
        const double err_est = eps * abs_sum[r] * h;
        if (std::abs(out.mu[r]) > 1e-300 && err_est > 1e-9 * std::abs(out.mu[r]))
            out.unstable = true;
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// QuadratureEngine
// ---------------------------------------------------------------------------

std::size_t QuadratureEngine::PatternKeyHash::operator()(const PatternKey& k) const {
    std::size_t h = std::hash<int>()(k.n * 64 + k.p);
    for (int v : k.rel_knots) h = h * 1000003u + static_cast<std::size_t>(v + 7);
    return h;
}

std::size_t QuadratureEngine::MomentKeyHash::operator()(const MomentKey& k) const {
    std::size_t h = std::hash<const void*>()(k.pattern);
    h ^= std::hash<std::uint64_t>()(k.c_bits) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>()(k.den) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

std::vector<SupportedBasis> QuadratureEngine::supports_from(const HierarchicalBasis& basis) {
    std::vector<SupportedBasis> out;
    out.reserve(basis.size());
    const LevelLadder& ladder = basis.ladder();
    for (const auto& f : basis.functions()) {
        SupportedBasis sb;
        sb.lo = f.lo;
        sb.hi = f.hi;
        sb.h = ladder.cell_width(f.level);
        sb.wraps = f.wraps;
        sb.grid_lo = f.grid_lo;
        sb.grid_den = ladder.cells(f.level);
        sb.local_knots = f.local_knots;
        sb.degree = ladder.degree();
        for (double v : f.local_knots)
            sb.pattern.push_back(static_cast<int>(std::llround((v - f.lo) / sb.h)));
        out.push_back(std::move(sb));
    }
    return out;
}

std::vector<SupportedBasis> QuadratureEngine::supports_from(const KnotVector& kv) {
    const auto part = kv.breakpoints();
    const int cells = static_cast<int>(part.breakpoints.size()) - 1;
    const double h = (kv.b() - kv.a()) / cells;
    std::vector<SupportedBasis> out;
    const int d = kv.degree();
    for (int i = 0; i < kv.count(); ++i) {
        SupportedBasis sb;
        sb.degree = d;
        sb.h = h;
        sb.lo = kv.knot(i);
        sb.hi = kv.knot(i + d + 1);
        sb.wraps = false;
        sb.grid_lo = std::llround((sb.lo - kv.a()) / h);
        sb.grid_den = cells;
        for (int k = 0; k <= d + 1; ++k) {
            sb.local_knots.push_back(kv.knot(i + k));
            sb.pattern.push_back(static_cast<int>(std::llround((kv.knot(i + k) - sb.lo) / h)));
        }
        out.push_back(std::move(sb));
    }
    return out;
}

QuadratureEngine::QuadratureEngine(std::vector<SupportedBasis> supports, const KernelSplit& split,
                                   QuadConfig config)
    : supports_(std::move(supports)), split_(split), config_(config) {
    const auto n = static_cast<std::int64_t>(supports_.size());
    inner_.resize(n);
    outer_.resize(n);
    inner_pattern_.resize(n);
    outer_pattern_.resize(n);
    inner_speed_.resize(n);
    outer_speed_.resize(n);
    inner_points_.resize(n);
    outer_points_.resize(n);

    for (std::int64_t i = 0; i < n; ++i) {
        const SupportedBasis& sb = supports_[i];
        for (int role = 0; role < 2; ++role) {
            const int nn = role == 0 ? config_.n_inner : config_.n_outer;
            const detail::ProductPattern& pat = pattern_for(sb, nn);
            RegularRule rule;
            rule.nodes.resize(nn + 1);
            for (int k = 0; k <= nn; ++k)
                rule.nodes[k] = sb.lo + sb.width() * k / nn;
            rule.weights = sb.h * pat.regular_weights_norm;
            Vector speeds = Vector::Ones(nn + 1);
            Eigen::Matrix2Xd pts = Eigen::Matrix2Xd::Zero(2, nn + 1);
            if (split_.has_curve()) {
                for (int k = 0; k <= nn; ++k) {
                    const double t = wrap_param(rule.nodes[k]);
                    speeds[k] = split_.curve().parametric_speed(t);
                    pts.col(k) = split_.curve().point(t);
                }
            }
            if (role == 0) {
                inner_pattern_[i] = &pat;
                inner_[i] = std::move(rule);
                inner_speed_[i] = std::move(speeds);
                inner_points_[i] = std::move(pts);
            } else {
                outer_pattern_[i] = &pat;
                outer_[i] = std::move(rule);
                outer_speed_[i] = std::move(speeds);
                outer_points_[i] = std::move(pts);
            }
        }
    }
}

const detail::ProductPattern& QuadratureEngine::pattern_for(const SupportedBasis& sb,
                                                            int n) const {
    PatternKey key{sb.pattern, n, config_.qi_degree};
    std::lock_guard lock(pattern_mutex_);
    auto it = patterns_.find(key);
    if (it == patterns_.end()) {
        it = patterns_
                 .emplace(std::move(key),
                          std::make_unique<detail::ProductPattern>(sb.pattern, sb.degree,
                                                                   config_.qi_degree, n))
                 .first;
    }
    return *it->second;
}

double QuadratureEngine::wrap_param(double t) const {
    if (!split_.closed()) return t;
    const double a = split_.domain_a(), b = split_.domain_b();
    if (t >= a && t < b) return t;
    double u = t;
    const double g = b - a;
    while (u >= b) u -= g;
    while (u < a) u += g;
    return u;
}

double QuadratureEngine::support_distance(std::int64_t j, double s) const {
    const SupportedBasis& sb = supports_[j];
    auto dist_to = [&](double x) { return std::max({sb.lo - x, x - sb.hi, 0.0}); };
    double d = dist_to(s);
    if (split_.closed()) {
        const double g = split_.gamma();
        d = std::min({d, dist_to(s + g), dist_to(s - g)});
    }
    return d;
}

bool QuadratureEngine::is_singular_or_near(std::int64_t j, double s) const {
    // Slack keeps exact distance ties (common on the dyadic grid) on the
    // singular side, consistent with the integer classification.
    return support_distance(j, s) <= supports_[j].width() * (1.0 + 1e-12);
}

double QuadratureEngine::c_tilde_for(std::int64_t j, double s, const GridPos& pos) const {
    const SupportedBasis& sb = supports_[j];
    if (pos.exact() && sb.grid_den > 0) {
        // c = (s - lo)/h with everything on the integer grid: bit-stable
        // across translated pairs.
        const std::int64_t num = pos.num * sb.grid_den - sb.grid_lo * pos.den;
        return static_cast<double>(num) / static_cast<double>(pos.den);
    }
    return (s - sb.lo) / sb.h;
}

const detail::MomentResult& QuadratureEngine::moments_for(std::int64_t j, double c_tilde) const {
    const detail::ProductPattern& pat = *inner_pattern_[j];
    const SupportedBasis& sb = supports_[j];
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &c_tilde, sizeof(bits));
    const MomentKey key{&pat, bits, sb.grid_den};

    const std::size_t shard = MomentKeyHash()(key) % kShards;
    {
        std::lock_guard lock(moment_mutex_[shard]);
        auto it = moment_cache_[shard].find(key);
        if (it != moment_cache_[shard].end()) return it->second;
    }
    const double gamma_units = split_.gamma() / sb.h;
    detail::MomentResult result = detail::modified_moments_normalized(
        pat, c_tilde, sb.h, split_.closed(), gamma_units, config_.extended_precision_moments);
    if (result.unstable) unstable_seen_ = true;
    std::lock_guard lock(moment_mutex_[shard]);
    return moment_cache_[shard].emplace(key, std::move(result)).first->second;
}

SingularRule QuadratureEngine::singular_rule(std::int64_t j, double s) const {
    return singular_rule_impl(j, s, GridPos{});
}

SingularRule QuadratureEngine::singular_rule(std::int64_t j, const GridPos& s) const {
    const double value = split_.domain_a() +
                         (split_.domain_b() - split_.domain_a()) *
                             (static_cast<double>(s.num) / static_cast<double>(s.den));
    return singular_rule_impl(j, value, s);
}

SingularRule QuadratureEngine::singular_rule_impl(std::int64_t j, double s,
                                                  const GridPos& pos) const {
    const detail::MomentResult& m = moments_for(j, c_tilde_for(j, s, pos));
    SingularRule rule;
    rule.nodes = inner_[j].nodes;
    rule.weights = inner_pattern_[j]->weight_map * m.mu;
    rule.unstable = m.unstable;
    return rule;
}

Vector QuadratureEngine::modified_moments(std::int64_t j, double s, bool* unstable) const {
    const detail::MomentResult& m = moments_for(j, c_tilde_for(j, s, GridPos{}));
    if (unstable) *unstable = m.unstable;
    return m.mu;
}

double QuadratureEngine::pair_shift(std::int64_t i, std::int64_t j) const {
    if (!split_.closed()) return 0.0;
    const double ci = supports_[i].lo + 0.5 * supports_[i].width();
    const double cj = supports_[j].lo + 0.5 * supports_[j].width();
    return std::round((ci - cj) / split_.gamma());
}

double QuadratureEngine::source_shift(std::int64_t j, double s) const {
    if (!split_.closed()) return 0.0;
    const double cj = supports_[j].lo + 0.5 * supports_[j].width();
    return std::round((s - cj) / split_.gamma());
}

bool QuadratureEngine::classify_singular(std::int64_t j, double s, const GridPos& pos) const {
    const SupportedBasis& sb = supports_[j];
    if (pos.exact() && sb.grid_den > 0) {
        // Exact arithmetic: (s - lo)/h as the rational c/den with
        // c = num*grid_den - grid_lo*den; near iff some periodic shift of c
        // lies within [-U, 2U] support units (distance <= one support width).
        const std::int64_t c = pos.num * sb.grid_den - sb.grid_lo * pos.den;
        const std::int64_t U = sb.units();
        const std::int64_t shift = split_.closed() ? sb.grid_den * pos.den : 0;
        for (int k : {0, -1, 1}) {
            const std::int64_t ck = c + k * shift;
            if (ck >= -U * pos.den && ck <= 2 * U * pos.den) return true;
            if (!split_.closed()) break;
        }
        return false;
    }
    return is_singular_or_near(j, s);
}

double QuadratureEngine::inner_K2(std::int64_t j, double s, const GridPos& pos) const {
    return inner_K2_shifted(j, s, pos, source_shift(j, s));
}

double QuadratureEngine::inner_K2_shifted(std::int64_t j, double s, const GridPos& pos,
                                          double m) const {
    // Canonical reduction into the support frame keeps translation-equivalent
    // configurations on identical evaluation paths.
    GridPos p = pos;
    if (m != 0.0) {
        s -= m * split_.gamma();
        if (p.exact()) p.num -= static_cast<std::int64_t>(m) * p.den;
    }
    if (classify_singular(j, s, p)) {
        const detail::MomentResult& mom = moments_for(j, c_tilde_for(j, s, p));
        const Vector eta = inner_pattern_[j]->weight_map * mom.mu;
        return eta.dot(inner_speed_[j]);
    }
    // Kernel arguments stay unrolled; delta is valid on |s - t| < 2 gamma.
    const RegularRule& rule = inner_[j];
    double sum = 0.0;
    for (int k = 0; k < rule.nodes.size(); ++k)
        sum += rule.weights[k] * split_.K2(s, rule.nodes[k]) * inner_speed_[j][k];
    return sum;
}

double QuadratureEngine::inner_U(std::int64_t j, double s) const {
    return inner_U_from(j, s, split_.curve().point(s));
}

double QuadratureEngine::inner_U_from(std::int64_t j, double s, const Point2& Fs) const {
    const RegularRule& rule = inner_[j];
    const double m = source_shift(j, s);
    const double sr = s - m * split_.gamma();
    if (classify_singular(j, sr, GridPos{})) {
        double k1_part = 0.0;
        for (int k = 0; k < rule.nodes.size(); ++k)
            k1_part += rule.weights[k] *
                       split_.K1_points(sr, rule.nodes[k], Fs, inner_points_[j].col(k)) *
                       inner_speed_[j][k];
        return k1_part + inner_K2_shifted(j, s, GridPos{}, m);
    }
    double sum = 0.0;
    for (int k = 0; k < rule.nodes.size(); ++k)
        sum += rule.weights[k] * std::log((Fs - inner_points_[j].col(k)).norm()) *
               inner_speed_[j][k];
    return sum;
}

GridPos QuadratureEngine::outer_node_pos(std::int64_t i, int k) const {
    // Unrolled: kernel evaluation and moments use unrolled sources uniformly.
    const SupportedBasis& sb = supports_[i];
    if (sb.grid_den <= 0) return {};
    const int nn = config_.n_outer;
    GridPos pos;
    pos.num = sb.grid_lo * nn + static_cast<std::int64_t>(sb.units()) * k;
    pos.den = sb.grid_den * nn;
    return pos;
}

double QuadratureEngine::assemble_IK1(std::int64_t i, std::int64_t j) const {
    const RegularRule& out_rule = outer_[i];
    const RegularRule& in_rule = inner_[j];
    const double shift = pair_shift(i, j) * split_.gamma();
    double total = 0.0;
    for (int k = 0; k < out_rule.nodes.size(); ++k) {
        const double s = out_rule.nodes[k] - shift;
        const Point2 Fs = outer_points_[i].col(k);
        double row = 0.0;
        for (int m = 0; m < in_rule.nodes.size(); ++m)
            row += split_.K1_points(s, in_rule.nodes[m], Fs, inner_points_[j].col(m)) *
                   inner_speed_[j][m] * in_rule.weights[m];
        total += out_rule.weights[k] * outer_speed_[i][k] * row;
    }
    return total;
}

double QuadratureEngine::assemble_IK2(std::int64_t i, std::int64_t j) const {
    const RegularRule& out_rule = outer_[i];
    const double m = pair_shift(i, j);
    double total = 0.0;
    for (int k = 0; k < out_rule.nodes.size(); ++k) {
        total += out_rule.weights[k] * outer_speed_[i][k] *
                 inner_K2_shifted(j, out_rule.nodes[k], outer_node_pos(i, k), m);
    }
    return total;
}

double QuadratureEngine::matrix_entry(std::int64_t i, std::int64_t j) const {
    // Across levels the outer rule goes onto the finer support, so a
    // localized inner integral is always sampled at its own resolution.
    // Equal-level pairs average the two orientations, which keeps the entry
    // independent of the argument order.
    const double wi = supports_[i].h, wj = supports_[j].h;
    if (wi > wj) return assemble_IK1(j, i) + assemble_IK2(j, i);
    if (wj > wi) return assemble_IK1(i, j) + assemble_IK2(i, j);
    if (i == j) return assemble_IK1(i, i) + assemble_IK2(i, i);
    return 0.5 * (assemble_IK1(i, j) + assemble_IK2(i, j) + assemble_IK1(j, i) +
                  assemble_IK2(j, i));
}

double QuadratureEngine::apply_outer(std::int64_t i,
                                     const std::function<double(double)>& g) const {
    const RegularRule& rule = outer_[i];
    double sum = 0.0;
    for (int k = 0; k < rule.nodes.size(); ++k) sum += rule.weights[k] * g(wrap_param(rule.nodes[k]));
    return sum;
}

}  // namespace igabem
