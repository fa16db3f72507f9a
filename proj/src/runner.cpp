#include "igabem/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace igabem {

double fit_order(std::span<const double> n_dof, std::span<const double> error) {
    if (n_dof.size() != error.size() || n_dof.size() < 4)
        throw std::invalid_argument("fit_order: need at least 4 samples");
    const std::size_t tail = std::max<std::size_t>(4, n_dof.size() / 2);
    return fit_loglog_slope(n_dof.last(tail), error.last(tail));
}

namespace {

void write_error_json(const std::filesystem::path& dir, const std::string& message, int code) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(dir / "error.json");
    nlohmann::json j;
    j["error"] = message;
    j["code"] = code;
    out << j.dump(2) << "\n";
}

std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

int run(const RunConfig& config) {
    std::filesystem::path dir = config.output_dir;
    if (const char* env = std::getenv("IGABEM_OUTPUT_DIR")) dir = env;

    ProblemDefinition problem;
    AdaptiveParams params;
    try {
        problem = load_problem(config.problem);
        params.theta = config.theta < 0 ? problem.reference.theta : config.theta;
        params.max_iter = (config.max_iter < 0 ? problem.reference.max_iter : config.max_iter) + 1;
        params.target_dof = config.target_dof;
        params.quad.n_inner = config.n_inner < 0 ? problem.reference.n_inner : config.n_inner;
        params.quad.n_outer = config.n_outer < 0 ? problem.reference.n_outer : config.n_outer;
        params.quad.qi_degree =
            config.qi_degree < 0 ? problem.reference.qi_degree : config.qi_degree;
        params.quad.extended_precision_moments = config.extended_moments;
        params.convention = config.convention;
        params.uniform = config.mode == "uniform";
        if (config.mode != "uniform" && config.mode != "adaptive")
            throw std::invalid_argument("mode must be 'adaptive' or 'uniform'");
        if (!(params.theta > 0.0 && params.theta <= 1.0))
            throw std::invalid_argument("theta out of range (0, 1]");
        if (params.quad.n_inner < params.quad.qi_degree ||
            params.quad.n_outer < params.quad.qi_degree)
            throw std::invalid_argument("node counts must be at least the QI degree");
        if (params.max_iter < 1) throw std::invalid_argument("max-iter must be non-negative");
    } catch (const std::exception& e) {
        write_error_json(dir, e.what(), 2);
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<AdaptiveState> states;
    try {
        states = adaptive_loop(problem, params);
    } catch (const std::exception& e) {
        write_error_json(dir, e.what(), 1);
        return 1;
    }
    const auto t1 = std::chrono::steady_clock::now();

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);

    // convergence.csv
    {
        std::ofstream out(dir / "convergence.csv");
        out << "iteration,N_H,eta,error,slope_to_date,marked_cells,deepest_level\n";
        std::vector<double> N, err;
        for (const auto& st : states) {
            N.push_back(static_cast<double>(st.n_dof));
            err.push_back(st.error.value_or(0.0));
            std::string slope = "";
            if (st.error && N.size() >= 4) slope = csv_double(fit_order(N, err));
            out << st.iteration << "," << st.n_dof << "," << csv_double(st.eta) << ","
                << (st.error ? csv_double(*st.error) : "") << "," << slope << ","
                << st.marked_count << "," << st.deepest_level << "\n";
        }
    }

    // mesh_<k>.json and solution_<k>.csv
    for (const auto& st : states) {
        {
            std::ofstream out(dir / ("mesh_" + std::to_string(st.iteration) + ".json"));
            out << mesh_to_json(*st.mesh, *st.regions) << "\n";
        }
        {
            // Rebuild the basis for this snapshot and sample phi_h.
            LevelLadder ladder(problem.curve->knots());
            auto [mesh, basis] = build_hierarchy(ladder, *st.regions);
            const DensitySolution solution(st.alpha, &basis, problem.curve.get());
            std::ofstream out(dir / ("solution_" + std::to_string(st.iteration) + ".csv"));
            out << "t,phi_h\n";
            const int samples = 512;
            for (int k = 0; k <= samples; ++k) {
                const double t = problem.curve->a() +
                                 (problem.curve->b() - problem.curve->a()) * k / samples;
                out << csv_double(t) << "," << csv_double(solution.eval_param(t)) << "\n";
            }
        }
    }

    // plot.gp
    {
        std::ofstream out(dir / "plot.gp");
        out << "set logscale xy\n"
            << "set xlabel 'N_H'\n"
            << "set ylabel 'error / estimator'\n"
            << "set datafile separator ','\n"
            << "set key left bottom\n"
            << "plot 'convergence.csv' using 2:4 with linespoints title 'error', \\\n"
            << "     'convergence.csv' using 2:3 with linespoints title 'eta'\n";
    }

    // metadata.json
    {
        nlohmann::json j;
        j["problem"] = problem.name;
        j["mode"] = config.mode;
        j["theta"] = params.theta;
        j["refinement_steps"] = params.max_iter - 1;
        j["target_dof"] = params.target_dof;
        j["n_inner"] = params.quad.n_inner;
        j["n_outer"] = params.quad.n_outer;
        j["qi_degree"] = params.quad.qi_degree;
        j["extended_moments"] = params.quad.extended_precision_moments;
        j["dorfler_sum"] = params.convention == DorflerSum::printed
                               ? "printed"
                               : (params.convention == DorflerSum::pure_linear ? "linear"
                                                                               : "squared");
        j["approach"] = problem.approach == Approach::direct ? "direct" : "indirect";
        j["error_norm"] = problem.norm == ErrorNorm::l2 ? "l2" : "energy";
        j["iterations_run"] = states.size();
        j["final_dof"] = states.empty() ? 0 : states.back().n_dof;
        if (!states.empty()) {
            j["sign_convention"] = states.back().solve.negated ? "negated" : "as_scaled";
            j["indefinite_operator"] = states.back().solve.indefinite;
            j["solve_residual"] = states.back().solve.residual;
        }
        j["seconds"] = std::chrono::duration<double>(t1 - t0).count();
        std::ofstream out(dir / "metadata.json");
        out << j.dump(2) << "\n";
    }
    return 0;
}

}  // namespace igabem
