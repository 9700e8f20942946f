#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cloudcluster/bounds.hpp"
#include "cloudcluster/detection.hpp"

namespace cloudcluster {

/// False-alarm / missed-detection probability pair.
struct ErrorPair {
    double p_fa = 0.0;
    double p_md = 0.0;
};

/// Cluster of n interchangeable sensors reduced to a count rule: decide H1
/// when more than gamma_c members report 1; on equality decide H1 with
/// probability (1 - tie_prob).
struct HomogeneousClusterSpec {
    int n = 1;
    double p_fa_s = 0.0;
    double p_md_s = 0.0;
    double gamma_c = 0.0;
    double tie_prob = 0.0;
};

void validate(const HomogeneousClusterSpec& spec);

/// Count-threshold <-> weighted-sum-threshold conversions for n sensors with
/// shared weights. A count rule at gamma_c is the weighted rule at
/// gamma_c * (w1 + w0) - n * w0, and vice versa.
[[nodiscard]] double count_to_weighted_threshold(double gamma_c, int n, const SensorWeights& w);
[[nodiscard]] double weighted_to_count_threshold(double gamma, int n, const SensorWeights& w);

/// Default enumeration caps; larger requests raise SizeCapError.
inline constexpr int kMaxEnumerationSensors = 24;
inline constexpr int kMaxEnumerationClusters = 16;

/// Three-way comparison of a weighted sum against a threshold with relative
/// tolerance: -1 below, 0 within tolerance, +1 above.
[[nodiscard]] int compare_weighted(double sum, double threshold, double rel_tol = 1e-9);

/// Finite distribution of a weighted sum of independent bits: atoms sorted
/// ascending with inclusive prefix masses under both hypotheses.
class WeightedSumDistribution {
public:
    struct Atom {
        double sum;
        double p0;
        double p1;
    };
    /// Probability masses strictly below, at (within tolerance), and strictly
    /// above a threshold, under each hypothesis.
    struct Masses {
        double below0, at0, above0;
        double below1, at1, above1;
    };

    WeightedSumDistribution() = default;
    [[nodiscard]] static WeightedSumDistribution from_atoms(std::vector<Atom>&& atoms);

    [[nodiscard]] Masses split(double threshold) const;
    [[nodiscard]] double total0() const;
    [[nodiscard]] double total1() const;
    [[nodiscard]] std::size_t size() const { return sums_.size(); }

private:
    std::vector<double> sums_;
    std::vector<double> cdf0_;
    std::vector<double> cdf1_;
};

/// Distribution of one cluster's weighted member-bit sum (2^n atoms).
[[nodiscard]] WeightedSumDistribution cluster_sum_distribution(
    const ClusterSpec& c, int max_sensors = kMaxEnumerationSensors);

/// The outcome branches one cluster contributes to the fusion-center sum:
/// silent, forwarded 1, forwarded 0, each carrying the value added to the
/// sum and its probability under each hypothesis. Zero-probability branches
/// are dropped, so the deterministic qualities (1,0) and (0,1) are
/// representable; any other boundary quality needs a diverging weight and
/// throws DegenerateError.
struct FcOutcomeBranches {
    int count = 0;
    double delta[3] = {0, 0, 0};
    double pr0[3] = {0, 0, 0};
    double pr1[3] = {0, 0, 0};
};

[[nodiscard]] FcOutcomeBranches fc_outcome_branches(const ClusterQuality& q);

/// Distribution of the fusion-center weighted sum over a set of clusters
/// (up to 3^m atoms).
[[nodiscard]] WeightedSumDistribution fc_sum_distribution(
    std::span<const ClusterQuality> qualities, int max_clusters = kMaxEnumerationClusters);

// ============================================================================
// Exact error probabilities
// ============================================================================

/// Binomial closed form for a homogeneous cluster.
[[nodiscard]] ErrorPair cluster_errors_homogeneous(const HomogeneousClusterSpec& spec);

/// Enumeration over all member-bit vectors for an arbitrary cluster.
[[nodiscard]] ErrorPair cluster_errors_enumerate(const ClusterSpec& c,
                                                 int max_sensors = kMaxEnumerationSensors);

/// Closed form for the fusion center when every cluster has the same quality:
/// conditions on the number of communicating clusters and thresholds their
/// 1-count. Requires both error probabilities strictly inside (0, 1).
[[nodiscard]] ErrorPair fc_errors_homogeneous(int n_c, const ClusterQuality& q, double gamma);

/// Joint enumeration of communication patterns and forwarded bits.
[[nodiscard]] ErrorPair fc_errors_enumerate(std::span<const ClusterQuality> qualities,
                                            double gamma,
                                            int max_clusters = kMaxEnumerationClusters);

// ============================================================================
// System evaluation
// ============================================================================

/// automatic: clusters larger than m_s and systems larger than m_c switch
/// from exact computation to the concentration bounds. exact_only: always
/// exact (raises SizeCapError when enumeration is infeasible).
enum class EstimatorPolicy { automatic, exact_only };

/// Cluster error masses decomposed about the threshold atom, so the tie
/// probability can be applied afterwards:
///   p_fa(p) = fa_sure + (1-p) * fa_tie,  p_md(p) = md_sure + p * md_tie.
struct ClusterErrorAtoms {
    double fa_sure = 0.0, fa_tie = 0.0;
    double md_sure = 0.0, md_tie = 0.0;
};

/// Evaluates a system at its stored thresholds or at overridden ones,
/// reusing per-cluster sum distributions and bound moments across calls.
/// Bound-produced cluster qualities are nudged into the open interval
/// (0, 1) before fusion so the fusion weights stay finite.
class SystemEvaluator {
public:
    explicit SystemEvaluator(SystemConfig config,
                             EstimatorPolicy policy = EstimatorPolicy::automatic);

    [[nodiscard]] EvalReport evaluate() const;
    [[nodiscard]] EvalReport evaluate(std::span<const double> gammas,
                                      std::span<const double> tie_probs) const;

    [[nodiscard]] ClusterQuality cluster_quality(std::size_t j, double gamma,
                                                 double tie_prob) const;
    /// Exact clusters only; bound clusters have no tie atom.
    [[nodiscard]] ClusterErrorAtoms cluster_error_atoms(std::size_t j, double gamma) const;
    [[nodiscard]] ErrorPair fc_errors(std::span<const ClusterQuality> qualities) const;

    [[nodiscard]] bool cluster_uses_bound(std::size_t j) const;
    [[nodiscard]] double cluster_comm(std::size_t j) const;
    [[nodiscard]] bool fc_uses_bound() const { return fc_bound_; }
    [[nodiscard]] double fc_gamma() const { return fc_gamma_; }
    [[nodiscard]] double cluster_ell_min(std::size_t j) const;
    [[nodiscard]] double cluster_ell_max(std::size_t j) const;
    [[nodiscard]] std::size_t num_clusters() const { return states_.size(); }
    [[nodiscard]] const SystemConfig& config() const { return config_; }
    [[nodiscard]] double loss(const ErrorPair& e) const;

private:
    struct ClusterState {
        int n = 0;
        bool homogeneous = false;
        bool use_bound = false;
        double comm = 0.0;
        double lmin = 0.0, lmax = 0.0;
        // homogeneous exact path
        SensorWeights shared_w;
        double p_fa_s = 0.0, p_md_s = 0.0;
        // heterogeneous exact path
        WeightedSumDistribution dist;
        // bound path: alpha_fa = gamma - mean0, alpha_md = mean1 - gamma
        double mean0 = 0.0, var0_sum = 0.0, m0 = 0.0;
        double mean1 = 0.0, var1_sum = 0.0, m1 = 0.0;
    };

    EvalReport assemble(std::span<const double> gammas, std::span<const double> tie_probs) const;

    SystemConfig config_;
    EstimatorPolicy policy_;
    double fc_gamma_ = 0.0;
    bool fc_bound_ = false;
    std::vector<ClusterState> states_;
};

/// One-shot system evaluation.
[[nodiscard]] EvalReport evaluate_system(const SystemConfig& config,
                                         EstimatorPolicy policy = EstimatorPolicy::automatic);

} // namespace cloudcluster
