#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cloudcluster/exact.hpp"

namespace cloudcluster {

/// Result of the homogeneous equal-threshold grid search.
struct HomogeneousSolution {
    int gamma_c = 0;
    double tie_prob = 0.0;
    double loss = 0.0;
    EvalReport report;
};

/// Exhaustive search over count thresholds {0..n/n_c} and tie probabilities
/// {0, 1/r_p, ..., 1} for a system of n_c identical clusters of identical
/// sensors. Loss evaluation follows config's m_s / m_c dispatch; only the
/// scalar fields of config are read (its cluster list is ignored). Ties are
/// broken toward smaller gamma_c, then smaller tie_prob.
[[nodiscard]] HomogeneousSolution optimize_homogeneous(int n, int n_c, const SensorParams& s,
                                                       const SystemConfig& config, int r_p = 100);

/// Evaluates the majority vote rule: each cluster decides H1 when its
/// 1-count reaches floor(n/n_c / 2) + 1. Always evaluated on the exact path.
[[nodiscard]] EvalReport majority_rule_loss(int n, int n_c, const SensorParams& s,
                                            const SystemConfig& config);

enum class InitScheme { optimal_homogeneous, midpoint, all_h1, all_h0 };

/// Starting point for the coordinate descent. optimal_homogeneous solves the
/// equal-threshold problem per cluster (sensor heterogeneity collapsed to
/// arithmetic-mean parameters) and back-transforms the count threshold;
/// midpoint takes the center of each cluster's likelihood range with
/// tie_prob 0.5; all_h1 / all_h0 start from the range endpoints that force
/// every cluster to decide H1 / H0 outright.
struct InitialValues {
    std::vector<double> gammas;
    std::vector<double> tie_probs;
};

[[nodiscard]] InitialValues initial_values(std::span<const ClusterSpec> clusters,
                                           InitScheme scheme, const SystemConfig& config,
                                           int r_p = 100);

struct GaussSeidelConfig {
    int r_gamma = 50; // threshold grid points per sensor
    int r_p = 100;
    // gamma changes are measured relative to each cluster's likelihood range
    double delta_gamma_tol = 1e-6;
    double delta_p_tol = 1e-6;
    int max_iters = 0; // coordinate updates; 0 means 50 * number of clusters
    int m_s = 20;
    int m_c = 10;
    InitScheme init_scheme = InitScheme::optimal_homogeneous;
};

void validate(const GaussSeidelConfig& gs);

struct HeterogeneousSolution {
    std::vector<double> gammas;
    std::vector<double> tie_probs;
    double surrogate_loss = 0.0;
    int iterations = 0;
    bool converged = false;
    /// objective at the starting point followed by one value per update
    std::vector<double> trace;
};

/// Cyclic coordinate descent over per-cluster (gamma, tie_prob) pairs.
/// Clusters larger than m_s use the concentration surrogate with tie_prob
/// pinned to 1; systems larger than m_c bound the fusion stage. The
/// incumbent is always a candidate, so the objective trace never increases.
/// Candidates whose surrogate is undefined (degenerate moments) are skipped.
class GaussSeidelOptimizer {
public:
    GaussSeidelOptimizer(std::vector<ClusterSpec> clusters, const SystemConfig& config,
                         const GaussSeidelConfig& gs);

    [[nodiscard]] HeterogeneousSolution run();
    [[nodiscard]] HeterogeneousSolution run(std::vector<double> gammas,
                                            std::vector<double> tie_probs);

    /// Objective of moving cluster j alone to (gamma, tie_prob) while the
    /// other clusters keep their current state; exactly the quantity the
    /// line search minimizes.
    [[nodiscard]] double coordinate_objective(std::size_t j, double gamma, double tie_prob) const;

    [[nodiscard]] std::span<const double> gamma_grid(std::size_t j) const;
    [[nodiscard]] std::span<const double> p_grid() const { return pgrid_; }
    [[nodiscard]] std::span<const double> gammas() const { return g_; }
    [[nodiscard]] std::span<const double> tie_probs() const { return p_; }
    [[nodiscard]] const SystemEvaluator& evaluator() const { return eval_; }
    [[nodiscard]] std::size_t num_clusters() const { return grids_.size(); }

private:
    struct Companion {
        bool fc_bound = false;
        bool has_dist = false;
        WeightedSumDistribution dist;
        double sum_mean0 = 0.0, sum_var0 = 0.0, m_fa = 0.0;
        double sum_center1 = 0.0, sum_var1 = 0.0, m_md = 0.0;
        std::vector<ClusterQuality> full;
    };

    void snap_to_grids(std::vector<double>& gammas, std::vector<double>& tie_probs) const;
    const Companion& companion(std::size_t j) const;
    [[nodiscard]] double combine(const Companion& comp, std::size_t j,
                                 const ClusterQuality& q) const;
    [[nodiscard]] double candidate_objective(const Companion& comp, std::size_t j, double gamma,
                                             double tie_prob) const;
    void update_coordinate(std::size_t j, double& out_loss);

    SystemConfig config_;
    GaussSeidelConfig gs_;
    SystemEvaluator eval_;
    std::vector<std::vector<double>> grids_;
    std::vector<double> pgrid_;
    std::vector<double> g_;
    std::vector<double> p_;
    int max_iters_ = 0;
    std::uint64_t version_ = 0;
    mutable std::uint64_t cache_version_ = ~std::uint64_t{0};
    mutable std::size_t cache_j_ = 0;
    mutable Companion cache_;
};

[[nodiscard]] HeterogeneousSolution optimize_heterogeneous(std::span<const ClusterSpec> clusters,
                                                           const SystemConfig& config,
                                                           const GaussSeidelConfig& gs);

} // namespace cloudcluster
