#include "cloudcluster/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "cloudcluster/errors.hpp"

namespace cloudcluster {
namespace {

constexpr double kTieEps = 1e-9;
// Bound-produced cluster qualities are nudged this far into (0, 1) before
// fusion so the fusion weights stay finite.
constexpr double kBoundFusionClamp = 1e-12;

double clamp_open_unit(double x) {
    return std::min(std::max(x, kBoundFusionClamp), 1.0 - kBoundFusionClamp);
}

double binom_pmf(int n, int k, double p) {
    if (k < 0 || k > n) return 0.0;
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(lc + k * std::log(p) + (n - k) * std::log1p(-p));
}

// Pr(K >= k) for K ~ Bin(n, p)
double binom_tail_geq(int n, int k, double p) {
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    long double acc = 0.0L;
    for (int j = k; j <= n; ++j) acc += static_cast<long double>(binom_pmf(n, j, p));
    return static_cast<double>(acc);
}

// Pr(K <= k)
double binom_cdf_le(int n, int k, double p) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return 0.0;
    long double acc = 0.0L;
    for (int j = 0; j <= k; ++j) acc += static_cast<long double>(binom_pmf(n, j, p));
    return static_cast<double>(acc);
}

struct CountSplit {
    double below, at, above;
};

// Masses of K <, =, > c for K ~ Bin(n, p), detecting integer c with the
// shared tolerance.
CountSplit binom_split(int n, double p, double c) {
    if (c < -0.5) return {0.0, 0.0, 1.0};
    if (c > n + 0.5) return {1.0, 0.0, 0.0};
    const double tol = kTieEps * std::max(1.0, std::fabs(c));
    const int i = static_cast<int>(std::llround(c));
    if (std::fabs(c - i) <= tol) {
        return {binom_cdf_le(n, i - 1, p), binom_pmf(n, i, p), binom_tail_geq(n, i + 1, p)};
    }
    const int lo = static_cast<int>(std::floor(c));
    return {binom_cdf_le(n, lo, p), 0.0, binom_tail_geq(n, lo + 1, p)};
}

bool same_error_profile(const SensorParams& a, const SensorParams& b) {
    return a.p_fa == b.p_fa && a.p_md == b.p_md;
}

} // namespace

void validate(const HomogeneousClusterSpec& spec) {
    if (spec.n < 1) throw DomainError("homogeneous cluster needs at least one sensor");
    if (!(spec.p_fa_s > 0.0 && spec.p_fa_s < 0.5))
        throw DomainError("sensor false-alarm probability must lie in (0, 0.5)");
    if (!(spec.p_md_s > 0.0 && spec.p_md_s < 0.5))
        throw DomainError("sensor missed-detection probability must lie in (0, 0.5)");
    const double slack = kTieEps * std::max(1.0, static_cast<double>(spec.n));
    if (!(spec.gamma_c >= -slack && spec.gamma_c <= spec.n + slack))
        throw DomainError("count threshold must lie in [0, n]");
    if (!(spec.tie_prob >= 0.0 && spec.tie_prob <= 1.0))
        throw DomainError("tie probability must lie in [0, 1]");
}

double count_to_weighted_threshold(double gamma_c, int n, const SensorWeights& w) {
    return gamma_c * (w.w1 + w.w0) - n * w.w0;
}

double weighted_to_count_threshold(double gamma, int n, const SensorWeights& w) {
    return (gamma + n * w.w0) / (w.w1 + w.w0);
}

int compare_weighted(double sum, double threshold, double rel_tol) {
    const double tol = rel_tol * std::max(1.0, std::fabs(threshold));
    if (sum > threshold + tol) return 1;
    if (sum < threshold - tol) return -1;
    return 0;
}

WeightedSumDistribution WeightedSumDistribution::from_atoms(std::vector<Atom>&& atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.sum < b.sum; });
    WeightedSumDistribution d;
    d.sums_.reserve(atoms.size());
    d.cdf0_.reserve(atoms.size());
    d.cdf1_.reserve(atoms.size());
    long double acc0 = 0.0L, acc1 = 0.0L;
    for (const Atom& a : atoms) {
        acc0 += a.p0;
        acc1 += a.p1;
        d.sums_.push_back(a.sum);
        d.cdf0_.push_back(static_cast<double>(acc0));
        d.cdf1_.push_back(static_cast<double>(acc1));
    }
    return d;
}

WeightedSumDistribution::Masses WeightedSumDistribution::split(double threshold) const {
    const double tol = kTieEps * std::max(1.0, std::fabs(threshold));
    const auto lo = std::lower_bound(sums_.begin(), sums_.end(), threshold - tol);
    const auto hi = std::upper_bound(sums_.begin(), sums_.end(), threshold + tol);
    const std::size_t a = static_cast<std::size_t>(lo - sums_.begin());
    const std::size_t b = static_cast<std::size_t>(hi - sums_.begin());
    Masses m{};
    const double upto_a0 = a ? cdf0_[a - 1] : 0.0;
    const double upto_b0 = b ? cdf0_[b - 1] : 0.0;
    const double upto_a1 = a ? cdf1_[a - 1] : 0.0;
    const double upto_b1 = b ? cdf1_[b - 1] : 0.0;
    m.below0 = upto_a0;
    m.at0 = upto_b0 - upto_a0;
    m.above0 = total0() - upto_b0;
    m.below1 = upto_a1;
    m.at1 = upto_b1 - upto_a1;
    m.above1 = total1() - upto_b1;
    return m;
}

double WeightedSumDistribution::total0() const { return cdf0_.empty() ? 0.0 : cdf0_.back(); }
double WeightedSumDistribution::total1() const { return cdf1_.empty() ? 0.0 : cdf1_.back(); }

WeightedSumDistribution cluster_sum_distribution(const ClusterSpec& c, int max_sensors) {
    validate(c);
    const int n = static_cast<int>(c.sensors.size());
    if (n > max_sensors)
        throw SizeCapError("cluster enumeration over 2^" + std::to_string(n) +
                           " outcomes exceeds the cap of 2^" + std::to_string(max_sensors));
    std::vector<SensorWeights> w(c.sensors.size());
    for (std::size_t i = 0; i < c.sensors.size(); ++i) w[i] = sensor_weights(c.sensors[i]);

    std::vector<WeightedSumDistribution::Atom> atoms;
    atoms.reserve(std::size_t{1} << n);
    auto rec = [&](auto&& self, std::size_t i, double sum, double p0, double p1) -> void {
        if (i == c.sensors.size()) {
            atoms.push_back({sum, p0, p1});
            return;
        }
        const SensorParams& s = c.sensors[i];
        self(self, i + 1, sum + w[i].w1, p0 * s.p_fa, p1 * (1.0 - s.p_md));
        self(self, i + 1, sum - w[i].w0, p0 * (1.0 - s.p_fa), p1 * s.p_md);
    };
    rec(rec, 0, 0.0, 1.0, 1.0);
    return WeightedSumDistribution::from_atoms(std::move(atoms));
}

FcOutcomeBranches fc_outcome_branches(const ClusterQuality& q) {
    if (!(q.p_fa_c >= 0.0 && q.p_fa_c <= 1.0 && q.p_md_c >= 0.0 && q.p_md_c <= 1.0))
        throw DomainError("cluster quality error probabilities must lie in [0, 1]");
    if (!(q.p_com_c >= 0.0 && q.p_com_c <= 1.0))
        throw DomainError("cluster communication probability must lie in [0, 1]");

    FcOutcomeBranches b;
    const double silent = 1.0 - q.p_com_c;
    if (silent > 0.0) {
        b.delta[b.count] = 0.0;
        b.pr0[b.count] = silent;
        b.pr1[b.count] = silent;
        ++b.count;
    }
    const auto floored = [](double pr) { return pr > kFcProbFloor ? pr : 0.0; };
    const double one_h0 = floored(q.p_com_c * q.p_fa_c);
    const double one_h1 = floored(q.p_com_c * (1.0 - q.p_md_c));
    if (one_h0 > 0.0 || one_h1 > 0.0) {
        const double w1 = std::log((1.0 - q.p_md_c) / q.p_fa_c);
        if (!std::isfinite(w1))
            throw DegenerateError("fusion weight w1 diverges for boundary cluster quality");
        b.delta[b.count] = w1;
        b.pr0[b.count] = one_h0;
        b.pr1[b.count] = one_h1;
        ++b.count;
    }
    const double zero_h0 = floored(q.p_com_c * (1.0 - q.p_fa_c));
    const double zero_h1 = floored(q.p_com_c * q.p_md_c);
    if (zero_h0 > 0.0 || zero_h1 > 0.0) {
        const double w0 = std::log((1.0 - q.p_fa_c) / q.p_md_c);
        if (!std::isfinite(w0))
            throw DegenerateError("fusion weight w0 diverges for boundary cluster quality");
        b.delta[b.count] = -w0;
        b.pr0[b.count] = zero_h0;
        b.pr1[b.count] = zero_h1;
        ++b.count;
    }
    return b;
}

WeightedSumDistribution fc_sum_distribution(std::span<const ClusterQuality> qualities,
                                            int max_clusters) {
    const int m = static_cast<int>(qualities.size());
    if (m > max_clusters)
        throw SizeCapError("fusion enumeration over 3^" + std::to_string(m) +
                           " outcomes exceeds the cap of 3^" + std::to_string(max_clusters));
    std::vector<FcOutcomeBranches> bs;
    bs.reserve(qualities.size());
    std::size_t leaves = 1;
    for (const auto& q : qualities) {
        bs.push_back(fc_outcome_branches(q));
        leaves *= static_cast<std::size_t>(std::max(bs.back().count, 1));
    }
    std::vector<WeightedSumDistribution::Atom> atoms;
    atoms.reserve(leaves);
    auto rec = [&](auto&& self, std::size_t j, double sum, double p0, double p1) -> void {
        if (p0 == 0.0 && p1 == 0.0) return;
        if (j == bs.size()) {
            atoms.push_back({sum, p0, p1});
            return;
        }
        const FcOutcomeBranches& br = bs[j];
        for (int k = 0; k < br.count; ++k)
            self(self, j + 1, sum + br.delta[k], p0 * br.pr0[k], p1 * br.pr1[k]);
    };
    rec(rec, 0, 0.0, 1.0, 1.0);
    return WeightedSumDistribution::from_atoms(std::move(atoms));
}

ErrorPair cluster_errors_homogeneous(const HomogeneousClusterSpec& spec) {
    validate(spec);
    const CountSplit s0 = binom_split(spec.n, spec.p_fa_s, spec.gamma_c);
    const CountSplit s1 = binom_split(spec.n, 1.0 - spec.p_md_s, spec.gamma_c);
    return {std::clamp(s0.above + (1.0 - spec.tie_prob) * s0.at, 0.0, 1.0),
            std::clamp(s1.below + spec.tie_prob * s1.at, 0.0, 1.0)};
}

ErrorPair cluster_errors_enumerate(const ClusterSpec& c, int max_sensors) {
    const WeightedSumDistribution d = cluster_sum_distribution(c, max_sensors);
    const auto m = d.split(c.gamma);
    return {std::clamp(m.above0 + (1.0 - c.tie_prob) * m.at0, 0.0, 1.0),
            std::clamp(m.below1 + c.tie_prob * m.at1, 0.0, 1.0)};
}

ErrorPair fc_errors_homogeneous(int n_c, const ClusterQuality& q, double gamma) {
    if (n_c < 1) throw DomainError("fusion center needs at least one cluster");
    if (!(q.p_com_c >= 0.0 && q.p_com_c <= 1.0))
        throw DomainError("cluster communication probability must lie in [0, 1]");
    const SensorWeights w = cluster_weights(q);
    const double den = w.w1 + w.w0;

    long double pfa = 0.0L, pmd = 0.0L;
    for (int k = 0; k <= n_c; ++k) {
        const double pk = binom_pmf(n_c, k, q.p_com_c);
        if (pk == 0.0) continue;
        double pfa_k, pmd_k;
        if (den > 0.0) {
            const double ck = (gamma + k * w.w0) / den;
            const CountSplit s0 = binom_split(k, q.p_fa_c, ck);
            const CountSplit s1 = binom_split(k, 1.0 - q.p_md_c, ck);
            pfa_k = s0.above + s0.at;
            pmd_k = s1.below;
        } else if (den < 0.0) {
            const double ck = (gamma + k * w.w0) / den;
            const CountSplit s0 = binom_split(k, q.p_fa_c, ck);
            const CountSplit s1 = binom_split(k, 1.0 - q.p_md_c, ck);
            pfa_k = s0.below + s0.at;
            pmd_k = s1.above;
        } else {
            // every 1-count yields the same sum -k*w0
            const bool h1 = compare_weighted(-k * w.w0, gamma) >= 0;
            pfa_k = h1 ? 1.0 : 0.0;
            pmd_k = h1 ? 0.0 : 1.0;
        }
        pfa += static_cast<long double>(pk) * pfa_k;
        pmd += static_cast<long double>(pk) * pmd_k;
    }
    return {std::clamp(static_cast<double>(pfa), 0.0, 1.0),
            std::clamp(static_cast<double>(pmd), 0.0, 1.0)};
}

ErrorPair fc_errors_enumerate(std::span<const ClusterQuality> qualities, double gamma,
                              int max_clusters) {
    const int m = static_cast<int>(qualities.size());
    if (m < 1) throw DomainError("fusion center needs at least one cluster");
    if (m > max_clusters)
        throw SizeCapError("fusion enumeration over 3^" + std::to_string(m) +
                           " outcomes exceeds the cap of 3^" + std::to_string(max_clusters));
    std::vector<FcOutcomeBranches> bs;
    bs.reserve(qualities.size());
    for (const auto& q : qualities) bs.push_back(fc_outcome_branches(q));

    long double pfa = 0.0L, pmd = 0.0L;
    auto rec = [&](auto&& self, std::size_t j, double sum, double p0, double p1) -> void {
        if (p0 == 0.0 && p1 == 0.0) return;
        if (j == bs.size()) {
            if (compare_weighted(sum, gamma) >= 0)
                pfa += p0;
            else
                pmd += p1;
            return;
        }
        const FcOutcomeBranches& br = bs[j];
        for (int k = 0; k < br.count; ++k)
            self(self, j + 1, sum + br.delta[k], p0 * br.pr0[k], p1 * br.pr1[k]);
    };
    rec(rec, 0, 0.0, 1.0, 1.0);
    return {std::clamp(static_cast<double>(pfa), 0.0, 1.0),
            std::clamp(static_cast<double>(pmd), 0.0, 1.0)};
}

SystemEvaluator::SystemEvaluator(SystemConfig config, EstimatorPolicy policy)
    : config_(std::move(config)), policy_(policy) {
    validate(config_);
    fc_gamma_ = fc_threshold(config_);
    fc_bound_ = policy_ == EstimatorPolicy::automatic &&
                static_cast<int>(config_.clusters.size()) > config_.m_c;

    states_.reserve(config_.clusters.size());
    for (const ClusterSpec& c : config_.clusters) {
        ClusterState st;
        st.n = static_cast<int>(c.sensors.size());
        st.comm = cluster_comm_prob(c);
        st.lmin = ell_min(c);
        st.lmax = ell_max(c);
        st.homogeneous = std::all_of(c.sensors.begin(), c.sensors.end(), [&](const auto& s) {
            return same_error_profile(s, c.sensors.front());
        });
        st.use_bound = policy_ == EstimatorPolicy::automatic && st.n > config_.m_s;
        if (st.use_bound) {
            // identical accumulation to cluster_fa_bound / cluster_md_bound
            for (const auto& s : c.sensors) {
                const SensorWeights w = sensor_weights(s);
                const double span = w.w1 + w.w0;
                st.mean0 += s.p_fa * w.w1 - (1.0 - s.p_fa) * w.w0;
                st.var0_sum += s.p_fa * (1.0 - s.p_fa) * span * span;
                st.m0 = std::max(st.m0, std::max(s.p_fa, 1.0 - s.p_fa) * span);
                st.mean1 += (1.0 - s.p_md) * w.w1 - s.p_md * w.w0;
                st.var1_sum += s.p_md * (1.0 - s.p_md) * span * span;
                st.m1 = std::max(st.m1, std::max(s.p_md, 1.0 - s.p_md) * span);
            }
        } else if (st.homogeneous) {
            st.shared_w = sensor_weights(c.sensors.front());
            st.p_fa_s = c.sensors.front().p_fa;
            st.p_md_s = c.sensors.front().p_md;
        } else {
            st.dist = cluster_sum_distribution(c);
        }
        states_.push_back(std::move(st));
    }
}

ClusterErrorAtoms SystemEvaluator::cluster_error_atoms(std::size_t j, double gamma) const {
    const ClusterState& st = states_.at(j);
    if (st.use_bound)
        throw DomainError("cluster error atoms are only defined on the exact path");
    ClusterErrorAtoms a;
    if (st.homogeneous) {
        const double c = weighted_to_count_threshold(gamma, st.n, st.shared_w);
        const CountSplit s0 = binom_split(st.n, st.p_fa_s, c);
        const CountSplit s1 = binom_split(st.n, 1.0 - st.p_md_s, c);
        a.fa_sure = s0.above;
        a.fa_tie = s0.at;
        a.md_sure = s1.below;
        a.md_tie = s1.at;
    } else {
        const auto m = st.dist.split(gamma);
        a.fa_sure = m.above0;
        a.fa_tie = m.at0;
        a.md_sure = m.below1;
        a.md_tie = m.at1;
    }
    return a;
}

ClusterQuality SystemEvaluator::cluster_quality(std::size_t j, double gamma,
                                                double tie_prob) const {
    const ClusterState& st = states_.at(j);
    ClusterQuality q;
    q.p_com_c = st.comm;
    if (st.use_bound) {
        const double fa =
            improved_bennett_bound({st.n, gamma - st.mean0, st.m0, st.var0_sum / st.n});
        const double md =
            improved_bennett_bound({st.n, st.mean1 - gamma, st.m1, st.var1_sum / st.n});
        q.p_fa_c = clamp_open_unit(fa);
        q.p_md_c = clamp_open_unit(md);
        q.is_bound = true;
        return q;
    }
    const ClusterErrorAtoms a = cluster_error_atoms(j, gamma);
    // the mass sums can overshoot the unit interval by rounding dust
    q.p_fa_c = std::clamp(a.fa_sure + (1.0 - tie_prob) * a.fa_tie, 0.0, 1.0);
    q.p_md_c = std::clamp(a.md_sure + tie_prob * a.md_tie, 0.0, 1.0);
    q.is_bound = false;
    return q;
}

namespace {

// With identical qualities the 3^m fusion enumeration collapses to a
// multinomial fold over the shared branch set, quadratic in the cluster
// count. Unlike the closed form this also covers boundary qualities, whose
// zero-probability branches fc_outcome_branches has already dropped.
ErrorPair fc_errors_identical(int m, const ClusterQuality& q, double gamma) {
    if (m < 1) throw DomainError("fusion center needs at least one cluster");
    const FcOutcomeBranches br = fc_outcome_branches(q);
    double delta[3] = {0.0, 0.0, 0.0};
    double pr0[3] = {0.0, 0.0, 0.0};
    double pr1[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < br.count; ++i) {
        delta[i] = br.delta[i];
        pr0[i] = br.pr0[i];
        pr1[i] = br.pr1[i];
    }
    const auto mass = [](const double pr[3], int k0, int k1, int k2, double lc) {
        if ((k0 > 0 && pr[0] == 0.0) || (k1 > 0 && pr[1] == 0.0) || (k2 > 0 && pr[2] == 0.0))
            return 0.0;
        double l = lc;
        if (k0 > 0) l += k0 * std::log(pr[0]);
        if (k1 > 0) l += k1 * std::log(pr[1]);
        if (k2 > 0) l += k2 * std::log(pr[2]);
        return std::exp(l);
    };
    const double lm = std::lgamma(m + 1.0);
    long double pfa = 0.0L, pmd = 0.0L;
    for (int k1 = 0; k1 <= m; ++k1) {
        for (int k2 = 0; k1 + k2 <= m; ++k2) {
            const int k0 = m - k1 - k2;
            const double lc = lm - std::lgamma(k0 + 1.0) - std::lgamma(k1 + 1.0) -
                              std::lgamma(k2 + 1.0);
            const double p0 = mass(pr0, k0, k1, k2, lc);
            const double p1 = mass(pr1, k0, k1, k2, lc);
            if (p0 == 0.0 && p1 == 0.0) continue;
            const double sum = k0 * delta[0] + k1 * delta[1] + k2 * delta[2];
            if (compare_weighted(sum, gamma) >= 0)
                pfa += p0;
            else
                pmd += p1;
        }
    }
    return {std::clamp(static_cast<double>(pfa), 0.0, 1.0),
            std::clamp(static_cast<double>(pmd), 0.0, 1.0)};
}

} // namespace

ErrorPair SystemEvaluator::fc_errors(std::span<const ClusterQuality> qualities) const {
    if (fc_bound_)
        return {fc_fa_bound(qualities, fc_gamma_), fc_md_bound(qualities, fc_gamma_)};
    const bool identical = std::all_of(qualities.begin(), qualities.end(), [&](const auto& q) {
        return q.p_fa_c == qualities.front().p_fa_c && q.p_md_c == qualities.front().p_md_c &&
               q.p_com_c == qualities.front().p_com_c;
    });
    if (identical && !qualities.empty()) {
        const ClusterQuality& q = qualities.front();
        if (q.p_fa_c > 0.0 && q.p_fa_c < 1.0 && q.p_md_c > 0.0 && q.p_md_c < 1.0)
            return fc_errors_homogeneous(static_cast<int>(qualities.size()), q, fc_gamma_);
        return fc_errors_identical(static_cast<int>(qualities.size()), q, fc_gamma_);
    }
    return fc_errors_enumerate(qualities, fc_gamma_);
}

EvalReport SystemEvaluator::assemble(std::span<const double> gammas,
                                     std::span<const double> tie_probs) const {
    if (gammas.size() != states_.size() || tie_probs.size() != states_.size())
        throw DomainError("threshold overrides must match the number of clusters");
    std::vector<ClusterQuality> qs(states_.size());
    bool any_bound = false;
    for (std::size_t j = 0; j < states_.size(); ++j) {
        qs[j] = cluster_quality(j, gammas[j], tie_probs[j]);
        any_bound = any_bound || qs[j].is_bound;
    }
    const ErrorPair e = fc_errors(qs);
    EvalReport r;
    r.p_fa = e.p_fa;
    r.p_md = e.p_md;
    r.expected_loss = expected_loss(e.p_fa, e.p_md, config_);
    r.used_cluster_bound = any_bound;
    r.used_fc_bound = fc_bound_;
    return r;
}

EvalReport SystemEvaluator::evaluate() const {
    std::vector<double> gs, ps;
    gs.reserve(states_.size());
    ps.reserve(states_.size());
    for (const ClusterSpec& c : config_.clusters) {
        gs.push_back(c.gamma);
        ps.push_back(c.tie_prob);
    }
    return assemble(gs, ps);
}

EvalReport SystemEvaluator::evaluate(std::span<const double> gammas,
                                     std::span<const double> tie_probs) const {
    return assemble(gammas, tie_probs);
}

bool SystemEvaluator::cluster_uses_bound(std::size_t j) const { return states_.at(j).use_bound; }
double SystemEvaluator::cluster_comm(std::size_t j) const { return states_.at(j).comm; }
double SystemEvaluator::cluster_ell_min(std::size_t j) const { return states_.at(j).lmin; }
double SystemEvaluator::cluster_ell_max(std::size_t j) const { return states_.at(j).lmax; }

double SystemEvaluator::loss(const ErrorPair& e) const {
    return expected_loss(e.p_fa, e.p_md, config_);
}

EvalReport evaluate_system(const SystemConfig& config, EstimatorPolicy policy) {
    return SystemEvaluator(config, policy).evaluate();
}

} // namespace cloudcluster
