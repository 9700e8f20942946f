#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cloudcluster/errors.hpp"

namespace cloudcluster {

// ============================================================================
// Core model types
// ============================================================================

/// Per-sensor operating point: false-alarm and missed-detection probabilities
/// of the local binary test, plus the probability that the sensor's link to
/// the fusion path is up during a reporting slot.
struct SensorParams {
    double p_fa = 0.0;
    double p_md = 0.0;
    double p_com = 1.0;
};

/// Log-likelihood-ratio weights of one sensor's bit.
/// w1 applies to a reported 1, w0 to a reported 0; both are positive for any
/// sensor that is better than chance on both error types.
struct SensorWeights {
    double w1 = 0.0;
    double w0 = 0.0;
};

/// A cluster: member sensors, the weighted-sum decision threshold gamma, and
/// the randomized tie-break probability. When the weighted sum equals gamma
/// the cluster decides H1 with probability (1 - tie_prob).
struct ClusterSpec {
    std::vector<SensorParams> sensors;
    double gamma = 0.0;
    double tie_prob = 0.0;
};

/// Cluster-level decision quality as seen by the fusion center, plus the
/// probability that at least one member link is up. is_bound marks values
/// that came from a concentration bound rather than an exact computation.
struct ClusterQuality {
    double p_fa_c = 0.0;
    double p_md_c = 0.0;
    double p_com_c = 1.0;
    bool is_bound = false;
};

/// Full system: clusters, the prior on H1, the two decision losses, and the
/// size switches that pick exact evaluation vs concentration bounds.
/// Clusters of more than m_s sensors use the cluster-level bounds; systems of
/// more than m_c clusters use the fusion-center bounds.
struct SystemConfig {
    std::vector<ClusterSpec> clusters;
    double p1 = 0.5;
    double loss_fa = 1.0; // loss of deciding H1 under H0
    double loss_md = 1.0; // loss of deciding H0 under H1
    int m_s = 20;
    int m_c = 10;
};

/// System-level evaluation output with estimator provenance flags.
struct EvalReport {
    double p_fa = 0.0;
    double p_md = 0.0;
    double expected_loss = 0.0;
    bool used_cluster_bound = false;
    bool used_fc_bound = false;
};

// ============================================================================
// Validation
// ============================================================================

void validate(const SensorParams& s);
void validate(const ClusterSpec& c);
void validate(const SystemConfig& cfg);

// ============================================================================
// Operations
// ============================================================================

/// LLR weights of a sensor bit: w1 = ln((1-p_md)/p_fa), w0 = ln((1-p_fa)/p_md).
/// Throws DomainError unless p_fa and p_md lie in (0, 0.5).
[[nodiscard]] SensorWeights sensor_weights(const SensorParams& s);

/// Most negative / most positive value the cluster's weighted sum can take.
[[nodiscard]] double ell_min(const ClusterSpec& c);
[[nodiscard]] double ell_max(const ClusterSpec& c);

/// Probability that at least one member link of the cluster is up.
[[nodiscard]] double cluster_comm_prob(const ClusterSpec& c);

/// Expected number of clusters heard by the fusion center in one slot.
[[nodiscard]] double expected_communicating_clusters(std::span<const ClusterSpec> clusters);

/// Fusion-center decision threshold ln(loss_fa * (1-p1) / (loss_md * p1)).
[[nodiscard]] double fc_threshold(const SystemConfig& cfg);

/// Bayes risk of the operating point (p_fa, p_md) under cfg's prior and losses.
[[nodiscard]] double expected_loss(double p_fa, double p_md, const SystemConfig& cfg);

/// Fusion weights attached to a cluster's forwarded bit, computed from its
/// decision quality exactly like sensor_weights. Throws DegenerateError when
/// either error probability sits on the boundary of (0, 1).
[[nodiscard]] SensorWeights cluster_weights(const ClusterQuality& q);

} // namespace cloudcluster
