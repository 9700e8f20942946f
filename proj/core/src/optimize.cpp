#include "cloudcluster/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "cloudcluster/errors.hpp"

namespace cloudcluster {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Companion fusion distributions are materialized up to 3^13 atoms; beyond
// that the line search falls back to full per-candidate enumeration.
constexpr std::size_t kCompanionDistCap = 13;

SystemConfig homogeneous_system(int n, int n_c, const SensorParams& s, const SystemConfig& config,
                                double gamma, double tie_prob) {
    SystemConfig sys;
    ClusterSpec c;
    c.sensors.assign(static_cast<std::size_t>(n / n_c), s);
    c.gamma = gamma;
    c.tie_prob = tie_prob;
    sys.clusters.assign(static_cast<std::size_t>(n_c), c);
    sys.p1 = config.p1;
    sys.loss_fa = config.loss_fa;
    sys.loss_md = config.loss_md;
    sys.m_s = config.m_s;
    sys.m_c = config.m_c;
    return sys;
}

void check_partition(int n, int n_c) {
    if (n < 1 || n_c < 1) throw DomainError("sensor and cluster counts must be positive");
    if (n % n_c != 0) throw DomainError("cluster count must divide the sensor count");
}

SystemConfig adopt(SystemConfig cfg, std::vector<ClusterSpec> clusters,
                   const GaussSeidelConfig& gs) {
    cfg.clusters = std::move(clusters);
    cfg.m_s = gs.m_s;
    cfg.m_c = gs.m_c;
    return cfg;
}

} // namespace

HomogeneousSolution optimize_homogeneous(int n, int n_c, const SensorParams& s,
                                         const SystemConfig& config, int r_p) {
    check_partition(n, n_c);
    if (r_p < 1) throw DomainError("tie grid resolution must be positive");
    validate(s);
    const int nn = n / n_c;
    const SensorWeights w = sensor_weights(s);
    const SystemEvaluator eval(
        homogeneous_system(n, n_c, s, config, count_to_weighted_threshold(0, nn, w), 0.0));

    std::vector<double> gvec(static_cast<std::size_t>(n_c));
    std::vector<double> pvec(static_cast<std::size_t>(n_c));
    HomogeneousSolution best;
    best.loss = kInf;
    for (int c = 0; c <= nn; ++c) {
        const double gamma = count_to_weighted_threshold(c, nn, w);
        std::fill(gvec.begin(), gvec.end(), gamma);
        for (int i = 0; i <= r_p; ++i) {
            const double p = static_cast<double>(i) / r_p;
            std::fill(pvec.begin(), pvec.end(), p);
            const EvalReport rep = eval.evaluate(gvec, pvec);
            if (rep.expected_loss < best.loss) {
                best.gamma_c = c;
                best.tie_prob = p;
                best.loss = rep.expected_loss;
                best.report = rep;
            }
        }
    }
    return best;
}

EvalReport majority_rule_loss(int n, int n_c, const SensorParams& s, const SystemConfig& config) {
    check_partition(n, n_c);
    validate(s);
    const int nn = n / n_c;
    const SensorWeights w = sensor_weights(s);
    // H1 whenever the 1-count reaches floor(nn/2)+1: that count is the
    // threshold atom and ties at it go to H1
    const double gamma = count_to_weighted_threshold(nn / 2 + 1, nn, w);
    return evaluate_system(homogeneous_system(n, n_c, s, config, gamma, 0.0),
                           EstimatorPolicy::exact_only);
}

InitialValues initial_values(std::span<const ClusterSpec> clusters, InitScheme scheme,
                             const SystemConfig& config, int r_p) {
    if (clusters.empty()) throw DomainError("at least one cluster is required");
    const int n_c = static_cast<int>(clusters.size());
    InitialValues iv;
    iv.gammas.reserve(clusters.size());
    iv.tie_probs.reserve(clusters.size());
    for (const ClusterSpec& c : clusters) {
        validate(c);
        const double lmin = ell_min(c);
        const double lmax = ell_max(c);
        switch (scheme) {
        case InitScheme::midpoint:
            iv.gammas.push_back(0.5 * (lmin + lmax));
            iv.tie_probs.push_back(0.5);
            break;
        case InitScheme::all_h1:
            iv.gammas.push_back(lmin);
            iv.tie_probs.push_back(0.0);
            break;
        case InitScheme::all_h0:
            iv.gammas.push_back(lmax);
            iv.tie_probs.push_back(1.0);
            break;
        case InitScheme::optimal_homogeneous: {
            const int nj = static_cast<int>(c.sensors.size());
            SensorParams mean;
            mean.p_fa = mean.p_md = mean.p_com = 0.0;
            for (const SensorParams& s : c.sensors) {
                mean.p_fa += s.p_fa;
                mean.p_md += s.p_md;
                mean.p_com += s.p_com;
            }
            mean.p_fa /= nj;
            mean.p_md /= nj;
            mean.p_com /= nj;
            const HomogeneousSolution sol = optimize_homogeneous(nj * n_c, n_c, mean, config, r_p);
            iv.gammas.push_back(
                count_to_weighted_threshold(sol.gamma_c, nj, sensor_weights(mean)));
            iv.tie_probs.push_back(sol.tie_prob);
            break;
        }
        }
    }
    return iv;
}

void validate(const GaussSeidelConfig& gs) {
    if (gs.r_gamma < 1) throw DomainError("threshold grid resolution must be positive");
    if (gs.r_p < 1) throw DomainError("tie grid resolution must be positive");
    if (!(gs.delta_gamma_tol > 0.0) || !(gs.delta_p_tol > 0.0))
        throw DomainError("convergence tolerances must be positive");
    if (gs.max_iters < 0) throw DomainError("iteration cap must be nonnegative");
    if (gs.m_s < 1 || gs.m_c < 1) throw DomainError("estimator size caps must be positive");
}

GaussSeidelOptimizer::GaussSeidelOptimizer(std::vector<ClusterSpec> clusters,
                                           const SystemConfig& config, const GaussSeidelConfig& gs)
    : config_(adopt(config, std::move(clusters), gs)), gs_(gs), eval_(config_) {
    validate(gs_);
    const std::size_t n_c = config_.clusters.size();
    grids_.reserve(n_c);
    g_.resize(n_c);
    p_.resize(n_c);
    for (std::size_t j = 0; j < n_c; ++j) {
        const int points = gs_.r_gamma * static_cast<int>(config_.clusters[j].sensors.size());
        const double lmin = eval_.cluster_ell_min(j);
        const double lmax = eval_.cluster_ell_max(j);
        const double d = (lmax - lmin) / points;
        std::vector<double> grid(static_cast<std::size_t>(points) + 1);
        for (int i = 0; i <= points; ++i) grid[static_cast<std::size_t>(i)] = lmin + i * d;
        grid.back() = lmax;
        grids_.push_back(std::move(grid));
        g_[j] = config_.clusters[j].gamma;
        p_[j] = config_.clusters[j].tie_prob;
    }
    pgrid_.resize(static_cast<std::size_t>(gs_.r_p) + 1);
    for (int i = 0; i <= gs_.r_p; ++i)
        pgrid_[static_cast<std::size_t>(i)] = static_cast<double>(i) / gs_.r_p;
    max_iters_ = gs_.max_iters > 0 ? gs_.max_iters : 50 * static_cast<int>(n_c);
    snap_to_grids(g_, p_);
}

void GaussSeidelOptimizer::snap_to_grids(std::vector<double>& gammas,
                                         std::vector<double>& tie_probs) const {
    for (std::size_t j = 0; j < grids_.size(); ++j) {
        const auto& grid = grids_[j];
        const double d = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
        double idx = std::round((gammas[j] - grid.front()) / d);
        idx = std::clamp(idx, 0.0, static_cast<double>(grid.size() - 1));
        gammas[j] = grid[static_cast<std::size_t>(idx)];
        double pi = std::round(tie_probs[j] * gs_.r_p);
        pi = std::clamp(pi, 0.0, static_cast<double>(gs_.r_p));
        tie_probs[j] = pgrid_[static_cast<std::size_t>(pi)];
    }
}

const GaussSeidelOptimizer::Companion& GaussSeidelOptimizer::companion(std::size_t j) const {
    if (cache_version_ == version_ && cache_j_ == j) return cache_;
    Companion c;
    const std::size_t n_c = g_.size();
    c.fc_bound = eval_.fc_uses_bound();
    if (c.fc_bound) {
        for (std::size_t k = 0; k < n_c; ++k) {
            if (k == j) continue;
            const FcMoments m = fc_moments(eval_.cluster_quality(k, g_[k], p_[k]));
            c.sum_mean0 += m.mean0;
            c.sum_var0 += m.var0;
            c.m_fa = std::max(c.m_fa, m.m_fa);
            c.sum_center1 += m.center1;
            c.sum_var1 += m.var1;
            c.m_md = std::max(c.m_md, m.m_md);
        }
    } else {
        std::vector<ClusterQuality> all(n_c);
        for (std::size_t k = 0; k < n_c; ++k) all[k] = eval_.cluster_quality(k, g_[k], p_[k]);
        if (n_c - 1 <= kCompanionDistCap) {
            std::vector<ClusterQuality> others;
            others.reserve(n_c - 1);
            for (std::size_t k = 0; k < n_c; ++k)
                if (k != j) others.push_back(all[k]);
            c.dist = fc_sum_distribution(others);
            c.has_dist = true;
        } else {
            c.full = std::move(all);
        }
    }
    cache_ = std::move(c);
    cache_j_ = j;
    cache_version_ = version_;
    return cache_;
}

double GaussSeidelOptimizer::combine(const Companion& comp, std::size_t j,
                                     const ClusterQuality& q) const {
    const double gfc = eval_.fc_gamma();
    double pfa, pmd;
    if (comp.fc_bound) {
        const int n_c = static_cast<int>(g_.size());
        const FcMoments m = fc_moments(q);
        pfa = fc_fa_bound_from_moments(n_c, comp.sum_mean0 + m.mean0, comp.sum_var0 + m.var0,
                                       std::max(comp.m_fa, m.m_fa), gfc);
        pmd = fc_md_bound_from_moments(n_c, comp.sum_center1 + m.center1, comp.sum_var1 + m.var1,
                                       std::max(comp.m_md, m.m_md), gfc);
    } else if (comp.has_dist) {
        const FcOutcomeBranches br = fc_outcome_branches(q);
        long double fa = 0.0L, md = 0.0L;
        for (int b = 0; b < br.count; ++b) {
            const auto mm = comp.dist.split(gfc - br.delta[b]);
            fa += static_cast<long double>(br.pr0[b]) * (mm.at0 + mm.above0);
            md += static_cast<long double>(br.pr1[b]) * mm.below1;
        }
        pfa = static_cast<double>(fa);
        pmd = static_cast<double>(md);
    } else {
        std::vector<ClusterQuality> all = comp.full;
        all[j] = q;
        const ErrorPair e = fc_errors_enumerate(all, gfc);
        pfa = e.p_fa;
        pmd = e.p_md;
    }
    return expected_loss(pfa, pmd, config_);
}

double GaussSeidelOptimizer::candidate_objective(const Companion& comp, std::size_t j,
                                                 double gamma, double tie_prob) const {
    try {
        return combine(comp, j, eval_.cluster_quality(j, gamma, tie_prob));
    } catch (const DegenerateError&) {
        return kInf;
    }
}

double GaussSeidelOptimizer::coordinate_objective(std::size_t j, double gamma,
                                                  double tie_prob) const {
    return candidate_objective(companion(j), j, gamma, tie_prob);
}

std::span<const double> GaussSeidelOptimizer::gamma_grid(std::size_t j) const {
    return grids_.at(j);
}

void GaussSeidelOptimizer::update_coordinate(std::size_t j, double& out_loss) {
    const Companion& comp = companion(j);
    double best = kInf, best_g = g_[j], best_p = p_[j];
    if (eval_.cluster_uses_bound(j)) {
        // concentration surrogate has no tie atom: p_j is pinned to 1
        best = candidate_objective(comp, j, g_[j], 1.0);
        best_p = 1.0;
        for (const double gamma : grids_[j]) {
            const double v = candidate_objective(comp, j, gamma, 1.0);
            if (v < best) {
                best = v;
                best_g = gamma;
            }
        }
    } else {
        const double comm = eval_.cluster_comm(j);
        for (const double gamma : grids_[j]) {
            const ClusterErrorAtoms a = eval_.cluster_error_atoms(j, gamma);
            const bool has_tie = a.fa_tie != 0.0 || a.md_tie != 0.0;
            for (const double p : pgrid_) {
                ClusterQuality q;
                q.p_fa_c = std::clamp(a.fa_sure + (1.0 - p) * a.fa_tie, 0.0, 1.0);
                q.p_md_c = std::clamp(a.md_sure + p * a.md_tie, 0.0, 1.0);
                q.p_com_c = comm;
                double v;
                try {
                    v = combine(comp, j, q);
                } catch (const DegenerateError&) {
                    v = kInf;
                }
                if (v < best) {
                    best = v;
                    best_g = gamma;
                    best_p = p;
                }
                if (!has_tie) break; // p does not enter; keep p = 0
            }
        }
        // the incumbent is on the grids, so it was among the candidates
    }
    if (best_g != g_[j] || best_p != p_[j]) {
        g_[j] = best_g;
        p_[j] = best_p;
        ++version_;
    }
    out_loss = best;
}

HeterogeneousSolution GaussSeidelOptimizer::run() {
    InitialValues iv = initial_values(config_.clusters, gs_.init_scheme, config_, gs_.r_p);
    return run(std::move(iv.gammas), std::move(iv.tie_probs));
}

HeterogeneousSolution GaussSeidelOptimizer::run(std::vector<double> gammas,
                                                std::vector<double> tie_probs) {
    const std::size_t n_c = grids_.size();
    if (gammas.size() != n_c || tie_probs.size() != n_c)
        throw DomainError("initial values must match the number of clusters");
    snap_to_grids(gammas, tie_probs);
    g_ = std::move(gammas);
    p_ = std::move(tie_probs);
    ++version_;

    HeterogeneousSolution sol;
    sol.trace.reserve(static_cast<std::size_t>(max_iters_) + 1);
    sol.trace.push_back(eval_.evaluate(g_, p_).expected_loss);

    std::vector<double> sweep_g = g_, sweep_p = p_;
    int t = 0;
    while (t < max_iters_) {
        double loss;
        update_coordinate(static_cast<std::size_t>(t) % n_c, loss);
        sol.trace.push_back(loss);
        ++t;
        if (t % static_cast<int>(n_c) == 0) {
            double dg = 0.0, dp = 0.0;
            for (std::size_t k = 0; k < n_c; ++k) {
                const double range = grids_[k].back() - grids_[k].front();
                dg = std::max(dg, std::fabs(g_[k] - sweep_g[k]) / range);
                dp = std::max(dp, std::fabs(p_[k] - sweep_p[k]));
            }
            sweep_g = g_;
            sweep_p = p_;
            if (dg <= gs_.delta_gamma_tol && dp <= gs_.delta_p_tol) {
                sol.converged = true;
                break;
            }
        }
    }
    sol.iterations = t;
    sol.gammas = g_;
    sol.tie_probs = p_;
    sol.surrogate_loss = sol.trace.back();
    return sol;
}

HeterogeneousSolution optimize_heterogeneous(std::span<const ClusterSpec> clusters,
                                             const SystemConfig& config,
                                             const GaussSeidelConfig& gs) {
    GaussSeidelOptimizer opt(std::vector<ClusterSpec>(clusters.begin(), clusters.end()), config,
                             gs);
    return opt.run();
}

} // namespace cloudcluster
