#pragma once

#include <cstdint>
#include <vector>

#include "cloudcluster/exact.hpp"

namespace cloudcluster {

/// One Monte Carlo draw of the full pipeline.
struct TrialOutcome {
    int truth = 0;
    int fc_decision = 0;
    int num_communicating = 0;
    double loss = 0.0;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
};

struct MonteCarloResult {
    McEstimate p_fa;               // conditional on H0 trials
    McEstimate p_md;               // conditional on H1 trials
    McEstimate loss;
    McEstimate avg_communicating;
    std::uint64_t trials_h0 = 0;
    std::uint64_t trials_h1 = 0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
};

/// Precompiled decision pipeline: per-sensor draw parameters and weights,
/// per-cluster thresholds, and the fusion weights derived from the same
/// cluster qualities the evaluator dispatch produces (exact or bound), so
/// simulation validates the rule as deployed.
struct SimulationPlan {
    struct ClusterPlan {
        std::vector<double> p_fa, p_md, p_com;
        std::vector<SensorWeights> w;
        double gamma = 0.0;
        double tie_prob = 0.0;
        double w1_c = 0.0, w0_c = 0.0;
    };
    std::vector<ClusterPlan> clusters;
    double fc_gamma = 0.0;
    double p1 = 0.5;
    double loss_fa = 1.0;
    double loss_md = 1.0;
};

[[nodiscard]] SimulationPlan make_simulation_plan(
    const SystemConfig& config, EstimatorPolicy policy = EstimatorPolicy::automatic);

/// Runs one trial on its own deterministic random stream; the same
/// (seed, trial) pair always yields the same outcome regardless of how
/// trials are partitioned across threads.
[[nodiscard]] TrialOutcome run_trial(const SimulationPlan& plan, std::uint64_t seed,
                                     std::uint64_t trial);

/// threads <= 0 selects the hardware concurrency.
[[nodiscard]] MonteCarloResult monte_carlo(const SystemConfig& config, std::uint64_t trials,
                                           std::uint64_t seed, int threads = 1,
                                           EstimatorPolicy policy = EstimatorPolicy::automatic);

} // namespace cloudcluster
