// Scratch probe: Dorfler aggregation conventions on the 10-iteration slit run.
#include <cmath>
#include <cstdio>

#include "igabem/adaptivity.hpp"

using namespace igabem;

int main() {
    const ProblemDefinition p = problem_slit();
    for (auto conv : {DorflerSum::printed, DorflerSum::pure_linear, DorflerSum::squared}) {
        AdaptiveParams params;
        params.quad.n_inner = p.reference.n_inner;
        params.quad.n_outer = p.reference.n_outer;
        params.theta = 1.0 - 1e-2;
        params.max_iter = 10;
        params.convention = conv;
        const auto states = adaptive_loop(p, params);
        std::vector<double> N, err;
        for (const auto& st : states) {
            N.push_back(static_cast<double>(st.n_dof));
            err.push_back(*st.error);
        }
        const std::size_t tail = std::max<std::size_t>(4, N.size() / 2);
        const char* name = conv == DorflerSum::printed
                               ? "printed"
                               : (conv == DorflerSum::pure_linear ? "linear " : "squared");
        std::printf("%s: it9 N=%3ld err=%.4e deepest=%d marked_last=%ld tail slope=%.3f\n", name,
                    states.back().n_dof, err.back(), states.back().deepest_level,
                    states.back().marked_count,
                    fit_loglog_slope(std::span(N).last(tail), std::span(err).last(tail)));
    }
    return 0;
}
