#include "cloudcluster/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cloudcluster {

namespace {

constexpr double kInvE = 0.36787944117144232160; // 1/e

double residual_tol(double x) { return 1e-12 * std::max(1.0, std::fabs(x)); }

double halley_step(double w, double x) {
    // f(w) = w e^w - x, f' = e^w (1+w), f'' = e^w (2+w)
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double fp = ew * (1.0 + w);
    const double denom = fp - f * (2.0 + w) / (2.0 * (1.0 + w));
    return w - f / denom;
}

double bisect_w(double x) {
    double lo, hi;
    if (x >= 0.0) {
        lo = 0.0;
        hi = 1.0 + std::log1p(x);
    } else {
        lo = -1.0;
        hi = 0.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = mid * std::exp(mid) - x;
        if (f == 0.0) return mid;
        (f < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// 0 * (possibly huge) -> 0, keeping boundary-probability products well defined
double prob_times(double pr, double value) { return pr == 0.0 ? 0.0 : pr * value; }

} // namespace

double lambert_w0(double x) {
    if (std::isnan(x)) throw DomainError("lambert_w0: NaN argument");
    if (x < -kInvE) {
        if (x < -kInvE - 1e-14) throw DomainError("lambert_w0 requires x >= -1/e");
        x = -kInvE;
    }
    if (x == 0.0) return 0.0;

    double w;
    if (x < -0.3235) {
        // series around the branch point in p = sqrt(2(e x + 1))
        const double p = std::sqrt(2.0 * (std::exp(1.0) * x + 1.0));
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
    } else if (x < std::exp(1.0)) {
        // the log-log form needs ln x bounded away from 0
        w = x / (1.0 + x);
    } else {
        const double l1 = std::log(x);
        const double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }

    for (int i = 0; i < 50; ++i) {
        const double next = halley_step(w, x);
        if (!std::isfinite(next)) break;
        const bool settled = std::fabs(next - w) <= 1e-16 * (1.0 + std::fabs(next));
        w = next;
        if (settled) break;
    }
    // NaN-safe: a diverged iteration must also fall back to bisection
    if (!(std::fabs(w * std::exp(w) - x) <= residual_tol(x))) {
        w = bisect_w(x);
        // polish the bisection result
        for (int i = 0; i < 8; ++i) w = halley_step(w, x);
    }
    return w;
}

double lambert_w0_of_exp(double b, double a) {
    if (!(b > 0.0)) throw DomainError("lambert_w0_of_exp requires b > 0");
    const double t = a + std::log(b);
    if (t <= 30.0) return lambert_w0(b * std::exp(a));
    // W(e^t) solves w + ln w = t; Newton on g(w) = w + ln w - t
    const double lt = std::log(t);
    double w = t - lt + lt / t;
    for (int i = 0; i < 50; ++i) {
        const double g = w + std::log(w) - t;
        const double step = g * w / (w + 1.0);
        w -= step;
        if (std::fabs(step) <= 1e-16 * w) break;
    }
    return w;
}

double bennett_bound(const BoundInputs& in) {
    if (in.n < 1) throw DomainError("bennett_bound: n must be >= 1");
    if (!(in.big_m > 0.0)) throw DomainError("bennett_bound: big_m must be positive");
    if (!(in.sigma2 > 0.0)) throw DomainError("bennett_bound: sigma2 must be positive");
    const double n_m = static_cast<double>(in.n) * in.big_m;
    if (!(in.alpha >= 0.0 && in.alpha < n_m))
        throw DomainError("bennett_bound: alpha outside [0, n*big_m)");
    const double ns2 = static_cast<double>(in.n) * in.sigma2;
    const double x = in.alpha * in.big_m / ns2;
    const double h = (1.0 + x) * std::log1p(x) - x;
    return clamp01(std::exp(-(ns2 / (in.big_m * in.big_m)) * h));
}

double improved_bennett_bound(const BoundInputs& in) {
    if (in.n < 1) throw DomainError("improved_bennett_bound: n must be >= 1");
    if (!(in.sigma2 >= 0.0)) throw DomainError("improved_bennett_bound: sigma2 must be >= 0");
    if (in.sigma2 == 0.0)
        throw DegenerateError("improved_bennett_bound: zero variance, statistic is deterministic");
    if (!(in.big_m > 0.0)) throw DomainError("improved_bennett_bound: big_m must be positive");
    if (in.alpha <= 0.0) return 1.0;
    const double n_m = static_cast<double>(in.n) * in.big_m;
    if (in.alpha >= n_m) return 0.0;

    const double m2 = in.big_m * in.big_m;
    const double big_b = n_m / in.alpha - 1.0; // > 0 on this branch
    const double big_a = m2 / in.sigma2 + big_b;
    const double lam = big_a - lambert_w0_of_exp(big_b, big_a);
    const double c = in.sigma2 / m2;
    double log_term;
    if (lam < 40.0) {
        log_term = std::log1p(c * (std::expm1(lam) - lam));
    } else {
        // 1 + c(e^L - 1 - L) = c e^L * (1 + (1 - c(1 + L)) e^-L / c)
        log_term = lam + std::log(c) + std::log1p((1.0 - c * (1.0 + lam)) * std::exp(-lam) / c);
    }
    const double expo = -lam * in.alpha / in.big_m + static_cast<double>(in.n) * log_term;
    if (expo >= 0.0) return 1.0;
    return clamp01(std::exp(expo));
}

double cluster_fa_bound(const ClusterSpec& c) {
    validate(c);
    const int n = static_cast<int>(c.sensors.size());
    double mean0 = 0.0, var_sum = 0.0, big_m = 0.0;
    for (const auto& s : c.sensors) {
        const SensorWeights w = sensor_weights(s);
        const double span = w.w1 + w.w0;
        mean0 += s.p_fa * w.w1 - (1.0 - s.p_fa) * w.w0;
        var_sum += s.p_fa * (1.0 - s.p_fa) * span * span;
        big_m = std::max(big_m, std::max(s.p_fa, 1.0 - s.p_fa) * span);
    }
    return improved_bennett_bound({n, c.gamma - mean0, big_m, var_sum / n});
}

double cluster_md_bound(const ClusterSpec& c) {
    validate(c);
    const int n = static_cast<int>(c.sensors.size());
    double mean1 = 0.0, var_sum = 0.0, big_m = 0.0;
    for (const auto& s : c.sensors) {
        const SensorWeights w = sensor_weights(s);
        const double span = w.w1 + w.w0;
        mean1 += (1.0 - s.p_md) * w.w1 - s.p_md * w.w0;
        var_sum += s.p_md * (1.0 - s.p_md) * span * span;
        big_m = std::max(big_m, std::max(s.p_md, 1.0 - s.p_md) * span);
    }
    return improved_bennett_bound({n, mean1 - c.gamma, big_m, var_sum / n});
}

FcMoments fc_moments(const ClusterQuality& q, FcMdForm form) {
    if (!(q.p_fa_c >= 0.0 && q.p_fa_c <= 1.0 && q.p_md_c >= 0.0 && q.p_md_c <= 1.0))
        throw DomainError("cluster quality error probabilities must lie in [0, 1]");
    if (!(q.p_com_c >= 0.0 && q.p_com_c <= 1.0))
        throw DomainError("cluster p_com_c must lie in [0, 1]");

    const double p = q.p_com_c;
    const auto floored = [](double pr) { return pr > kFcProbFloor ? pr : 0.0; };
    const double pr_z1_h0 = floored(p * q.p_fa_c);
    const double pr_z0_h0 = floored(p * (1.0 - q.p_fa_c));
    const double pr_z1_h1 = floored(p * (1.0 - q.p_md_c));
    const double pr_z0_h1 = floored(p * q.p_md_c);

    double w1 = 0.0, w0 = 0.0;
    if (pr_z1_h0 > 0.0 || pr_z1_h1 > 0.0) {
        w1 = std::log((1.0 - q.p_md_c) / q.p_fa_c);
        if (!std::isfinite(w1))
            throw DegenerateError("fusion weight w1 diverges for boundary cluster quality");
    }
    if (pr_z0_h0 > 0.0 || pr_z0_h1 > 0.0) {
        w0 = std::log((1.0 - q.p_fa_c) / q.p_md_c);
        if (!std::isfinite(w0))
            throw DegenerateError("fusion weight w0 diverges for boundary cluster quality");
    }

    FcMoments m;
    m.mean0 = prob_times(pr_z1_h0, w1) - prob_times(pr_z0_h0, w0);
    const double m2_0 = prob_times(pr_z1_h0, w1 * w1) + prob_times(pr_z0_h0, w0 * w0);
    m.var0 = m2_0 - m.mean0 * m.mean0;
    // deviation bound over the branches that actually carry probability
    m.m_fa = p < 1.0 ? std::fabs(m.mean0) : 0.0;
    if (pr_z1_h0 > 0.0) m.m_fa = std::max(m.m_fa, std::fabs(w1 - m.mean0));
    if (pr_z0_h0 > 0.0) m.m_fa = std::max(m.m_fa, std::fabs(w0 + m.mean0));

    const double mean1 = prob_times(pr_z1_h1, w1) - prob_times(pr_z0_h1, w0);
    const double m2_1 = prob_times(pr_z1_h1, w1 * w1) + prob_times(pr_z0_h1, w0 * w0);
    m.var1 = m2_1 - mean1 * mean1;
    if (form == FcMdForm::first_moment) {
        m.center1 = mean1;
        m.m_md = p < 1.0 ? std::fabs(m.center1) : 0.0;
        if (pr_z1_h1 > 0.0) m.m_md = std::max(m.m_md, std::fabs(w1 - m.center1));
        if (pr_z0_h1 > 0.0) m.m_md = std::max(m.m_md, std::fabs(w0 + m.center1));
    } else {
        m.center1 = m2_1;
        m.m_md = std::max(std::fabs(w1 - m.center1), std::fabs(w0 + m.center1));
    }
    return m;
}

double fc_fa_bound_from_moments(int n, double sum_mean0, double sum_var0, double big_m_fa,
                                double gamma) {
    if (n < 1) throw DomainError("fusion-center bound needs at least one cluster");
    return improved_bennett_bound({n, gamma - sum_mean0, big_m_fa, sum_var0 / n});
}

double fc_md_bound_from_moments(int n, double sum_center1, double sum_var1, double big_m_md,
                                double gamma) {
    if (n < 1) throw DomainError("fusion-center bound needs at least one cluster");
    return improved_bennett_bound({n, sum_center1 - gamma, big_m_md, sum_var1 / n});
}

double fc_fa_bound(std::span<const ClusterQuality> qualities, double gamma) {
    double sum_mean = 0.0, sum_var = 0.0, big_m = 0.0;
    for (const auto& q : qualities) {
        const FcMoments m = fc_moments(q);
        sum_mean += m.mean0;
        sum_var += m.var0;
        big_m = std::max(big_m, m.m_fa);
    }
    return fc_fa_bound_from_moments(static_cast<int>(qualities.size()), sum_mean, sum_var, big_m,
                                    gamma);
}

double fc_md_bound(std::span<const ClusterQuality> qualities, double gamma, FcMdForm form) {
    double sum_center = 0.0, sum_var = 0.0, big_m = 0.0;
    for (const auto& q : qualities) {
        const FcMoments m = fc_moments(q, form);
        sum_center += m.center1;
        sum_var += m.var1;
        big_m = std::max(big_m, m.m_md);
    }
    return fc_md_bound_from_moments(static_cast<int>(qualities.size()), sum_center, sum_var, big_m,
                                    gamma);
}

} // namespace cloudcluster
