#include "cloudcluster/detection.hpp"

#include <cmath>
#include <string>

namespace cloudcluster {

namespace {

bool in_open_unit_half(double p) { return p > 0.0 && p < 0.5; }

} // namespace

void validate(const SensorParams& s) {
    if (!in_open_unit_half(s.p_fa))
        throw DomainError("sensor p_fa must lie in (0, 0.5), got " + std::to_string(s.p_fa));
    if (!in_open_unit_half(s.p_md))
        throw DomainError("sensor p_md must lie in (0, 0.5), got " + std::to_string(s.p_md));
    if (!(s.p_com >= 0.0 && s.p_com <= 1.0))
        throw DomainError("sensor p_com must lie in [0, 1], got " + std::to_string(s.p_com));
}

void validate(const ClusterSpec& c) {
    if (c.sensors.empty()) throw DomainError("cluster must contain at least one sensor");
    for (const auto& s : c.sensors) validate(s);
    if (!(c.tie_prob >= 0.0 && c.tie_prob <= 1.0))
        throw DomainError("cluster tie_prob must lie in [0, 1], got " + std::to_string(c.tie_prob));
    const double lo = ell_min(c);
    const double hi = ell_max(c);
    const double slack = 1e-12 * std::max(1.0, std::max(std::fabs(lo), std::fabs(hi)));
    if (!(c.gamma >= lo - slack && c.gamma <= hi + slack))
        throw DomainError("cluster gamma " + std::to_string(c.gamma) + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void validate(const SystemConfig& cfg) {
    if (cfg.clusters.empty()) throw DomainError("system must contain at least one cluster");
    for (const auto& c : cfg.clusters) validate(c);
    if (!(cfg.p1 > 0.0 && cfg.p1 < 1.0))
        throw DomainError("p1 must lie in (0, 1), got " + std::to_string(cfg.p1));
    if (!(cfg.loss_fa > 0.0) || !(cfg.loss_md > 0.0))
        throw DomainError("decision losses must be positive");
    // 0 forces the concentration path everywhere
    if (cfg.m_s < 0) throw DomainError("m_s must be a nonnegative sensor count");
    if (cfg.m_c < 0) throw DomainError("m_c must be a nonnegative cluster count");
}

SensorWeights sensor_weights(const SensorParams& s) {
    validate(s);
    return {std::log((1.0 - s.p_md) / s.p_fa), std::log((1.0 - s.p_fa) / s.p_md)};
}

double ell_min(const ClusterSpec& c) {
    double sum = 0.0;
    for (const auto& s : c.sensors) sum -= sensor_weights(s).w0;
    return sum;
}

double ell_max(const ClusterSpec& c) {
    double sum = 0.0;
    for (const auto& s : c.sensors) sum += sensor_weights(s).w1;
    return sum;
}

double cluster_comm_prob(const ClusterSpec& c) {
    if (c.sensors.empty()) throw DomainError("cluster must contain at least one sensor");
    // 1 - prod(1 - p_com_i), accumulated as the product of silence probabilities
    double silence = 1.0;
    for (const auto& s : c.sensors) {
        validate(s);
        silence *= 1.0 - s.p_com;
    }
    return 1.0 - silence;
}

double expected_communicating_clusters(std::span<const ClusterSpec> clusters) {
    double sum = 0.0;
    for (const auto& c : clusters) sum += cluster_comm_prob(c);
    return sum;
}

double fc_threshold(const SystemConfig& cfg) {
    if (!(cfg.p1 > 0.0 && cfg.p1 < 1.0))
        throw DomainError("p1 must lie in (0, 1), got " + std::to_string(cfg.p1));
    if (!(cfg.loss_fa > 0.0) || !(cfg.loss_md > 0.0))
        throw DomainError("decision losses must be positive");
    return std::log(cfg.loss_fa * (1.0 - cfg.p1) / (cfg.loss_md * cfg.p1));
}

double expected_loss(double p_fa, double p_md, const SystemConfig& cfg) {
    if (!(p_fa >= 0.0 && p_fa <= 1.0) || !(p_md >= 0.0 && p_md <= 1.0))
        throw DomainError("error probabilities must lie in [0, 1]");
    if (!(cfg.p1 > 0.0 && cfg.p1 < 1.0))
        throw DomainError("p1 must lie in (0, 1), got " + std::to_string(cfg.p1));
    return (1.0 - cfg.p1) * p_fa * cfg.loss_fa + cfg.p1 * p_md * cfg.loss_md;
}

SensorWeights cluster_weights(const ClusterQuality& q) {
    if (!(q.p_fa_c > 0.0 && q.p_fa_c < 1.0 && q.p_md_c > 0.0 && q.p_md_c < 1.0))
        throw DegenerateError("cluster quality on the boundary of (0,1); fusion weights diverge");
    return {std::log((1.0 - q.p_md_c) / q.p_fa_c), std::log((1.0 - q.p_fa_c) / q.p_md_c)};
}

} // namespace cloudcluster
