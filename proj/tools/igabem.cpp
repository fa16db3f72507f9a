// Command-line driver: adaptive/uniform runs and convergence-order fits.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "igabem/runner.hpp"

namespace {

int fit_order_from_csv(const std::string& path, int col_x, int col_y) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 2;
    }
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> xs, ys;
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (col_x >= static_cast<int>(fields.size()) || col_y >= static_cast<int>(fields.size()))
            continue;
        if (fields[col_x].empty() || fields[col_y].empty()) continue;
        xs.push_back(std::stod(fields[col_x]));
        ys.push_back(std::stod(fields[col_y]));
    }
    try {
        std::cout << igabem::fit_order(xs, ys) << "\n";
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive isogeometric BEM solver for 2D Laplace problems"};
    app.require_subcommand(1);

    igabem::RunConfig config;
    std::string convention = "squared";
    auto* run_cmd = app.add_subcommand("run", "solve a problem with uniform or adaptive refinement");
    run_cmd->add_option("--problem", config.problem,
                        "builtin name (slit, pacman, lshape) or JSON problem file");
    run_cmd->add_option("--mode", config.mode, "adaptive | uniform");
    run_cmd->add_option("--theta", config.theta, "Dorfler marking parameter in (0, 1]");
    run_cmd->add_option("--max-iter", config.max_iter, "number of refinement steps");
    run_cmd->add_option("--target-nh", config.target_dof, "stop once N_H reaches this value");
    run_cmd->add_option("--n-inner", config.n_inner, "inner quadrature intervals");
    run_cmd->add_option("--n-outer", config.n_outer, "outer quadrature intervals");
    run_cmd->add_option("--p", config.qi_degree, "quasi-interpolation degree");
    run_cmd->add_option("--dorfler", convention, "marking sum: printed | linear | squared");
    run_cmd->add_flag("--extended-moments", config.extended_moments,
                      "long double moment evaluation");
    run_cmd->add_option("--out", config.output_dir, "output directory");

    std::string csv_path;
    int col_x = 1, col_y = 3;
    auto* fit_cmd = app.add_subcommand("fit-order", "tail slope of log(error) vs log(N_H)");
    fit_cmd->add_option("--csv", csv_path, "convergence CSV file")->required();
    fit_cmd->add_option("--col-x", col_x, "zero-based column of N_H (default 1)");
    fit_cmd->add_option("--col-y", col_y, "zero-based column of the error (default 3)");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        if (convention == "printed")
            config.convention = igabem::DorflerSum::printed;
        else if (convention == "linear")
            config.convention = igabem::DorflerSum::pure_linear;
        else if (convention == "squared")
            config.convention = igabem::DorflerSum::squared;
        else {
            std::cerr << "unknown Dorfler convention: " << convention << "\n";
            return 2;
        }
        return igabem::run(config);
    }
    return fit_order_from_csv(csv_path, col_x, col_y);
}
