#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "igabem/runner.hpp"

using namespace igabem;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fit_order") {
    SUBCASE("exact power data") {
        std::vector<double> N, err;
        for (int k = 1; k <= 8; ++k) {
            N.push_back(10.0 * k);
            err.push_back(5.0 * std::pow(10.0 * k, -3.5));
        }
        CHECK(fit_order(N, err) == doctest::Approx(-3.5).epsilon(1e-10));
    }

    SUBCASE("noisy power data stays within 0.2") {
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> noise(-0.05, 0.05);
        std::vector<double> N, err;
        for (int k = 1; k <= 12; ++k) {
            N.push_back(7.0 * k);
            err.push_back((1.0 + noise(rng)) * std::pow(7.0 * k, -2.0));
        }
        CHECK(fit_order(N, err) == doctest::Approx(-2.0).epsilon(0.2 / 2.0));
    }

    SUBCASE("fewer than 4 rows is an error") {
        std::vector<double> N{1, 2, 3}, err{1, 0.5, 0.25};
        CHECK_THROWS(fit_order(N, err));
    }
}

TEST_CASE("run: artifacts, determinism, validation") {
    RunConfig config;
    config.problem = "slit";
    config.mode = "adaptive";
    config.theta = 0.9;
    config.max_iter = 2;
    config.n_inner = 6;
    config.n_outer = 12;

    SUBCASE("artifacts are written and reruns are bit-identical") {
        config.output_dir = "/tmp/igabem_run_a";
        std::filesystem::remove_all(config.output_dir);
        REQUIRE(run(config) == 0);
        for (const char* name : {"convergence.csv", "mesh_0.json", "mesh_2.json",
                                 "solution_0.csv", "plot.gp", "metadata.json"})
            CHECK(std::filesystem::exists(std::filesystem::path(config.output_dir) / name));

        const std::string first = slurp(std::filesystem::path(config.output_dir) / "convergence.csv");
        config.output_dir = "/tmp/igabem_run_b";
        std::filesystem::remove_all(config.output_dir);
        REQUIRE(run(config) == 0);
        const std::string second =
            slurp(std::filesystem::path(config.output_dir) / "convergence.csv");
        CHECK(first == second);
        CHECK(first.find("iteration,N_H,eta,error") == 0);
    }

    SUBCASE("invalid theta exits with code 2 and an error file") {
        config.theta = 0.0;
        config.output_dir = "/tmp/igabem_run_bad";
        std::filesystem::remove_all(config.output_dir);
        CHECK(run(config) == 2);
        const std::string err = slurp(std::filesystem::path(config.output_dir) / "error.json");
        CHECK(err.find("theta") != std::string::npos);
    }

    SUBCASE("unknown problem exits with code 2") {
        config.problem = "not_a_problem";
        config.output_dir = "/tmp/igabem_run_bad2";
        CHECK(run(config) == 2);
    }
}
