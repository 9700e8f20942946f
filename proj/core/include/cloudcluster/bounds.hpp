#pragma once

#include <span>

#include "cloudcluster/detection.hpp"

namespace cloudcluster {

// ============================================================================
// Scalar machinery
// ============================================================================

/// Principal-branch Lambert W: the solution w >= -1 of w * exp(w) = x for
/// x >= -1/e. Residual |w e^w - x| <= 1e-12 * max(1, |x|).
[[nodiscard]] double lambert_w0(double x);

/// W(b * exp(a)) for b > 0, evaluated without forming b * exp(a); once the
/// argument is large the equation w + ln w = a + ln b is solved directly, so
/// arguments far beyond double range are fine.
[[nodiscard]] double lambert_w0_of_exp(double b, double a);

/// Inputs of a one-sided tail bound for a sum of n independent centered
/// variables: deviation alpha, almost-sure per-variable magnitude bound
/// big_m, and average per-variable variance sigma2.
struct BoundInputs {
    int n = 1;
    double alpha = 0.0;
    double big_m = 1.0;
    double sigma2 = 1.0;
};

/// Classical Bennett tail bound exp(-(n sigma2 / M^2) h(alpha M / (n sigma2)))
/// with h(x) = (1+x)ln(1+x) - x. Requires 0 <= alpha < n*M and sigma2 > 0.
[[nodiscard]] double bennett_bound(const BoundInputs& in);

/// Sharper Bennett-type bound obtained from the exact optimizer of the
/// Chernoff exponent: with A = M^2/sigma2 + nM/alpha - 1, B = nM/alpha - 1
/// and Lambda = A - W(B e^A),
///   U = exp(-Lambda alpha / M + n ln(1 + sigma2/M^2 (e^Lambda - 1 - Lambda))).
/// Returns 1 for alpha <= 0 and 0 for alpha >= n*M; otherwise U clamped to
/// [0, 1]. Throws DegenerateError when sigma2 == 0.
[[nodiscard]] double improved_bennett_bound(const BoundInputs& in);

// ============================================================================
// Cluster-level bounds (weighted sum of member bits vs gamma)
// ============================================================================

/// Upper bound on the cluster false-alarm probability at the cluster's gamma.
/// Out-of-range gamma is absorbed by the [0, 1] clamps of the scalar bound.
[[nodiscard]] double cluster_fa_bound(const ClusterSpec& c);

/// Upper bound on the cluster missed-detection probability.
[[nodiscard]] double cluster_md_bound(const ClusterSpec& c);

// ============================================================================
// Fusion-center-level bounds (weighted sum of forwarded bits vs gamma)
// ============================================================================

/// Branch probabilities at or below this floor are treated as exactly zero
/// when the forwarded bit of a cluster is modelled. Rounding in the exact
/// cluster error sums can leave dust mass (~1e-16) on a branch whose fusion
/// weight diverges; dropping such a branch perturbs any downstream
/// probability by at most the floor, while a diverging-weight branch with
/// real mass still throws DegenerateError.
inline constexpr double kFcProbFloor = 1e-13;

/// Centering used by the missed-detection bound. first_moment centers the
/// deviation at E(z | H1); second_moment_centering instead plugs E(z^2 | H1)
/// into alpha and the magnitude bound, kept selectable for side-by-side
/// comparison of the two variants.
enum class FcMdForm { first_moment, second_moment_centering };

/// Per-cluster moment pieces of the fusion-center bounds: first moment,
/// variance and almost-sure deviation bound of the forwarded weighted bit
/// under each hypothesis (a silent cluster contributes 0). center1 is the
/// H1 centering value selected by `form`; var1 is always the true variance.
/// Branches of probability zero are excluded from the deviation bounds, so
/// the deterministic qualities (1,0) and (0,1) are representable; any other
/// boundary quality needs a diverging weight and throws DegenerateError.
struct FcMoments {
    double mean0 = 0.0, var0 = 0.0, m_fa = 0.0;
    double center1 = 0.0, var1 = 0.0, m_md = 0.0;
};

[[nodiscard]] FcMoments fc_moments(const ClusterQuality& q,
                                   FcMdForm form = FcMdForm::first_moment);

/// Upper bound on the fusion-center false-alarm probability. Each summand is
/// the bit forwarded by one cluster, zeroed when the cluster stays silent.
[[nodiscard]] double fc_fa_bound(std::span<const ClusterQuality> qualities, double gamma);

/// Upper bound on the fusion-center missed-detection probability.
[[nodiscard]] double fc_md_bound(std::span<const ClusterQuality> qualities, double gamma,
                                 FcMdForm form = FcMdForm::first_moment);

/// Assembled-bound evaluators over precomputed moment sums, for callers that
/// sweep one cluster's quality and reuse the other clusters' partial sums.
[[nodiscard]] double fc_fa_bound_from_moments(int n, double sum_mean0, double sum_var0,
                                              double big_m_fa, double gamma);
[[nodiscard]] double fc_md_bound_from_moments(int n, double sum_center1, double sum_var1,
                                              double big_m_md, double gamma);

} // namespace cloudcluster
