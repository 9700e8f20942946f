#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloudcluster/optimize.hpp"

namespace cloudcluster {

/// Bad or missing configuration input; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Experiment description shared by all subcommands. Defaults reproduce the
/// reference setup: 500 sensors in 10 clusters, p1 = 0.65, losses 100 / 200,
/// sensor errors (0.2, 0.35) with a 20% heterogeneous deviation, 250
/// realizations, gamma grid of 50 points per sensor and p grid of 100.
struct ExperimentConfig {
    int sensors = 500;
    int clusters = 10;
    double p1 = 0.65;
    double loss_fa = 100.0; // L10, charged on a false alarm
    double loss_md = 200.0; // L01, charged on a missed detection
    double p_fa = 0.2;
    double p_md = 0.35;
    double p_com = 0.1;
    int m_s = 20; // clusters above this size switch to the concentration bounds
    int m_c = 10; // systems above this many clusters bound the fusion stage
    int r_gamma = 50; // threshold grid points per sensor
    int r_p = 100;
    double delta_gamma_tol = 1e-6;
    double delta_p_tol = 1e-6;
    int max_iters = 0; // coordinate updates, 0 = automatic cap
    std::string init_scheme = "optimal_homogeneous";
    double het_dev_fa = 0.2; // fractional half-width of the uniform draws
    double het_dev_md = 0.2;
    int realizations = 250;
    std::uint64_t trials = 1000000;
    std::uint64_t seed = 12345;
    std::vector<int> size_grid;            // comm-prob: cluster sizes, default 1..100
    std::vector<double> p_com_values;      // comm-prob: per-sensor curves
    std::vector<double> p_com_grid;        // sweep-pcom axis
    std::vector<int> cluster_grid;         // sweep-nc axis
};

/// Config with the default grids materialized (1..100 sizes, p_com curves
/// {0.05, 0.25, 0.5}, p_com sweep 0.05..0.5 step 0.05, cluster sweep over
/// the divisors of 500 up to 50).
[[nodiscard]] ExperimentConfig default_config();

/// Parses a JSON config; unknown keys and type mismatches are ConfigErrors.
/// Missing keys keep their defaults. Also validates.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Canonical JSON encoding; parse_config(emit_config(c)) reproduces c.
[[nodiscard]] std::string emit_config(const ExperimentConfig& cfg);

void validate(const ExperimentConfig& cfg);

[[nodiscard]] InitScheme init_scheme_from_name(const std::string& name);

} // namespace cloudcluster
