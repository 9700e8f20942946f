#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cloudcluster/optimize.hpp"
#include "cloudcluster/simulate.hpp"
#include "csv.hpp"
#include "experiment_config.hpp"

namespace cloudcluster {

/// Positive request wins; otherwise CLOUDCLUSTER_THREADS, then the hardware
/// concurrency. Results never depend on the thread count, only wall time.
[[nodiscard]] int resolve_threads(int requested);

/// Uniform parameter draw for heterogeneous realization r:
/// p ~ U[base(1 - dev), base(1 + dev)] per sensor, deterministic in
/// (seed, r) and independent of any sweep axis.
[[nodiscard]] std::vector<SensorParams> heterogeneous_draw(const ExperimentConfig& cfg, int r);

struct CommProbRow {
    int n = 0;
    double p_com_s = 0.0;
    double p_com_c = 0.0;
};
[[nodiscard]] std::vector<CommProbRow> run_comm_prob(const ExperimentConfig& cfg);
[[nodiscard]] CsvTable comm_prob_table(const std::vector<CommProbRow>& rows);

struct CurveRow {
    double sweep_value = 0.0;
    std::string curve;
    double loss = 0.0;
    double p_fa = 0.0;
    double p_md = 0.0;
    bool used_cluster_bound = false;
    bool used_fc_bound = false;
};

/// Expected loss vs per-sensor communication probability; five curves per
/// grid point: exact-optimized, majority baseline, exact loss at the
/// surrogate-optimized thresholds, the homogeneous surrogate itself, and
/// the heterogeneous surrogate averaged over the configured realizations.
[[nodiscard]] std::vector<CurveRow> run_sweep_pcom(const ExperimentConfig& cfg, int threads);

/// Same five curves vs the number of equal-size clusters.
[[nodiscard]] std::vector<CurveRow> run_sweep_nc(const ExperimentConfig& cfg, int threads);

[[nodiscard]] CsvTable curve_table(const std::vector<CurveRow>& rows, std::uint64_t seed);

struct OptimizeOutcome {
    HomogeneousSolution exact_opt;
    HomogeneousSolution bound_opt; // surrogate objective value
    EvalReport bound_opt_exact;    // exact loss at the surrogate-optimized thresholds
    double relative_gap = 0.0;

    struct SchemeStat {
        std::string name;
        double mean_loss = 0.0;
        double mean_p_fa = 0.0;
        double mean_p_md = 0.0;
        bool used_cluster_bound = false;
        bool used_fc_bound = false;
    };
    std::vector<SchemeStat> schemes;   // one per initialization scheme
    double scheme_one_win_share = 0.0; // realizations where optimal_homogeneous leads
};
[[nodiscard]] OptimizeOutcome run_optimize(const ExperimentConfig& cfg, int threads);
[[nodiscard]] CsvTable optimize_table(const OptimizeOutcome& o, std::uint64_t seed);
[[nodiscard]] std::string optimize_summary(const OptimizeOutcome& o, const ExperimentConfig& cfg);

struct SimulateRow {
    std::string quantity;
    double value = 0.0;
    double std_error = 0.0;
    double exact = 0.0;
};

/// Monte Carlo validation of the exact-optimized homogeneous system.
[[nodiscard]] std::vector<SimulateRow> run_simulate(const ExperimentConfig& cfg, int threads);
[[nodiscard]] CsvTable simulate_table(const std::vector<SimulateRow>& rows, std::uint64_t seed);

} // namespace cloudcluster
