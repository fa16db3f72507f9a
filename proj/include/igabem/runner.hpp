#ifndef IGABEM_RUNNER_HPP
#define IGABEM_RUNNER_HPP

#include <string>
#include <vector>

#include "igabem/adaptivity.hpp"

namespace igabem {

struct RunConfig {
    std::string problem = "slit";  // builtin name or JSON file path
    std::string mode = "adaptive";  // adaptive | uniform
    double theta = -1.0;            // < 0: problem reference value
    int max_iter = -1;              // refinement steps; < 0: problem reference value
    std::int64_t target_dof = 0;
    int n_inner = -1;
    int n_outer = -1;
    int qi_degree = -1;
    bool extended_moments = false;
    DorflerSum convention = DorflerSum::squared;
    std::string output_dir = "out";  // IGABEM_OUTPUT_DIR overrides
};

/// Least-squares slope of log(err) against log(N) over the last
/// max(4, n/2) samples.
double fit_order(std::span<const double> n_dof, std::span<const double> error);

/// Runs the configured problem and writes convergence.csv, mesh_<k>.json,
/// solution_<k>.csv, plot.gp and metadata.json into the output directory.
/// Returns 0 on success, 1 on numerical failure, 2 on configuration errors.
int run(const RunConfig& config);

}  // namespace igabem

#endif
