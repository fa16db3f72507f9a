// Scratch probe: squared-convention slit runs, theta sensitivity.
#include <cmath>
#include <cstdio>

#include "igabem/adaptivity.hpp"

using namespace igabem;

int main() {
    const ProblemDefinition p = problem_slit();
    for (double theta : {0.99, 0.95, 0.9, 0.8}) {
        AdaptiveParams params;
        params.quad.n_inner = 6;
        params.quad.n_outer = 12;
        params.theta = theta;
        params.max_iter = 10;
        params.convention = DorflerSum::squared;
        const auto states = adaptive_loop(p, params);
        std::vector<double> N, err;
        std::printf("theta=%.2f squared:\n", theta);
        for (const auto& st : states) {
            std::printf("  it=%d N=%3ld err=%.4e marked=%ld deepest=%d\n", st.iteration, st.n_dof,
                        *st.error, st.marked_count, st.deepest_level);
            N.push_back(static_cast<double>(st.n_dof));
            err.push_back(*st.error);
        }
        const std::size_t tail = std::max<std::size_t>(4, N.size() / 2);
        std::printf("  tail slope = %.3f\n",
                    fit_loglog_slope(std::span(N).last(tail), std::span(err).last(tail)));
    }
    return 0;
}
