#ifndef IGABEM_GAUSS_HPP
#define IGABEM_GAUSS_HPP

#include <Eigen/Core>

namespace igabem {

/// Gauss-Legendre rule on the reference interval [-1, 1].
struct GaussRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    int size() const { return static_cast<int>(nodes.size()); }
};

/// Nodes and weights of the n-point Gauss-Legendre rule. Cached per n.
const GaussRule& gauss_legendre(int n);

/// Integrates f over [a, b] with the n-point rule.
template <typename F>
double gauss_integrate(int n, double a, double b, F&& f) {
    const GaussRule& rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (int k = 0; k < rule.size(); ++k)
        sum += rule.weights[k] * f(mid + half * rule.nodes[k]);
    return half * sum;
}

/// Composite rule: [a, b] split into m equal cells, n points each.
template <typename F>
double gauss_integrate_composite(int n, int m, double a, double b, F&& f) {
    const double h = (b - a) / m;
    double sum = 0.0;
    for (int c = 0; c < m; ++c)
        sum += gauss_integrate(n, a + c * h, a + (c + 1) * h, f);
    return sum;
}

}  // namespace igabem

#endif
