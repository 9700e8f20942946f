#include "experiments.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace cloudcluster {
namespace {

constexpr double kInitWinSlack = 1e-9;

int env_threads() {
    const char* env = std::getenv("CLOUDCLUSTER_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (!end || *end != '\0' || v < 1 || v > INT_MAX)
        throw ConfigError("CLOUDCLUSTER_THREADS must be a positive integer");
    return static_cast<int>(v);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Any result
/// must be written to a slot indexed by i so merging stays deterministic.
template <typename Body>
void parallel_for(int count, int threads, const Body& body) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const int chunk = count / threads, rem = count % threads;
    int start = 0;
    for (int t = 0; t < threads; ++t) {
        const int len = chunk + (t < rem ? 1 : 0);
        pool.emplace_back([&, start, len] {
            try {
                for (int i = start; i < start + len; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
        start += len;
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

SystemConfig scalar_config(const ExperimentConfig& cfg, int m_s, int m_c) {
    SystemConfig sys;
    sys.p1 = cfg.p1;
    sys.loss_fa = cfg.loss_fa;
    sys.loss_md = cfg.loss_md;
    sys.m_s = m_s;
    sys.m_c = m_c;
    return sys;
}

std::vector<ClusterSpec> equal_clusters(const std::vector<SensorParams>& params, int n_c,
                                        double p_com) {
    const int nn = static_cast<int>(params.size()) / n_c;
    std::vector<ClusterSpec> clusters(static_cast<std::size_t>(n_c));
    for (int j = 0; j < n_c; ++j) {
        auto& c = clusters[static_cast<std::size_t>(j)];
        c.sensors.assign(params.begin() + static_cast<std::ptrdiff_t>(j) * nn,
                         params.begin() + static_cast<std::ptrdiff_t>(j + 1) * nn);
        for (auto& s : c.sensors) s.p_com = p_com;
        c.gamma = 0.0;
        c.tie_prob = 0.5;
    }
    return clusters;
}

SystemConfig deployed_homogeneous(const ExperimentConfig& cfg, int n_c, const SensorParams& s,
                                  int gamma_c, double tie_prob, int m_s, int m_c) {
    const int nn = cfg.sensors / n_c;
    SystemConfig sys = scalar_config(cfg, m_s, m_c);
    const double gamma = count_to_weighted_threshold(gamma_c, nn, sensor_weights(s));
    sys.clusters.assign(static_cast<std::size_t>(n_c),
                        ClusterSpec{std::vector<SensorParams>(static_cast<std::size_t>(nn), s),
                                    gamma, tie_prob});
    return sys;
}

void require_divisible(int sensors, int n_c) {
    if (n_c < 1 || sensors % n_c != 0)
        throw ConfigError("'clusters' (" + std::to_string(n_c) + ") must divide 'sensors' (" +
                          std::to_string(sensors) + ")");
}

struct HetAverages {
    double loss = 0.0, p_fa = 0.0, p_md = 0.0;
    bool used_cluster_bound = false, used_fc_bound = false;
};

/// Terminal surrogate loss of the coordinate descent with the configured
/// initialization, averaged over the parameter realizations in `draws`.
HetAverages heterogeneous_average(const ExperimentConfig& cfg,
                                  const std::vector<std::vector<SensorParams>>& draws, int n_c,
                                  double p_com, int threads) {
    GaussSeidelConfig gs;
    gs.r_gamma = cfg.r_gamma;
    gs.r_p = cfg.r_p;
    gs.delta_gamma_tol = cfg.delta_gamma_tol;
    gs.delta_p_tol = cfg.delta_p_tol;
    gs.max_iters = cfg.max_iters;
    gs.m_s = cfg.m_s;
    gs.m_c = cfg.m_c;
    gs.init_scheme = init_scheme_from_name(cfg.init_scheme);

    const int r_count = static_cast<int>(draws.size());
    std::vector<HetAverages> per(static_cast<std::size_t>(r_count));
    parallel_for(r_count, threads, [&](int r) {
        GaussSeidelOptimizer opt(equal_clusters(draws[static_cast<std::size_t>(r)], n_c, p_com),
                                 scalar_config(cfg, cfg.m_s, cfg.m_c), gs);
        const HeterogeneousSolution sol = opt.run();
        const EvalReport rep = opt.evaluator().evaluate(sol.gammas, sol.tie_probs);
        per[static_cast<std::size_t>(r)] = {sol.surrogate_loss, rep.p_fa, rep.p_md,
                                            rep.used_cluster_bound, rep.used_fc_bound};
    });

    HetAverages avg;
    for (const auto& h : per) {
        avg.loss += h.loss;
        avg.p_fa += h.p_fa;
        avg.p_md += h.p_md;
        avg.used_cluster_bound = avg.used_cluster_bound || h.used_cluster_bound;
        avg.used_fc_bound = avg.used_fc_bound || h.used_fc_bound;
    }
    avg.loss /= r_count;
    avg.p_fa /= r_count;
    avg.p_md /= r_count;
    return avg;
}

/// The five reference curves at one sweep point.
void append_five_curves(std::vector<CurveRow>& rows, const ExperimentConfig& cfg,
                        double sweep_value, int n_c, double p_com,
                        const std::vector<std::vector<SensorParams>>& draws, int threads) {
    const SensorParams s{cfg.p_fa, cfg.p_md, p_com};
    const SystemConfig exact_cfg = scalar_config(cfg, INT_MAX, INT_MAX);
    const SystemConfig bound_cfg = scalar_config(cfg, 0, 0);

    const HomogeneousSolution ex = optimize_homogeneous(cfg.sensors, n_c, s, exact_cfg, cfg.r_p);
    rows.push_back({sweep_value, "exact", ex.report.expected_loss, ex.report.p_fa, ex.report.p_md,
                    ex.report.used_cluster_bound, ex.report.used_fc_bound});

    const EvalReport mj = majority_rule_loss(cfg.sensors, n_c, s, exact_cfg);
    rows.push_back({sweep_value, "majority", mj.expected_loss, mj.p_fa, mj.p_md,
                    mj.used_cluster_bound, mj.used_fc_bound});

    const HomogeneousSolution bo = optimize_homogeneous(cfg.sensors, n_c, s, bound_cfg, cfg.r_p);
    const EvalReport at = evaluate_system(
        deployed_homogeneous(cfg, n_c, s, bo.gamma_c, bo.tie_prob, INT_MAX, INT_MAX));
    rows.push_back({sweep_value, "exact_at_approx_thresholds", at.expected_loss, at.p_fa, at.p_md,
                    at.used_cluster_bound, at.used_fc_bound});

    rows.push_back({sweep_value, "approx_homogeneous", bo.report.expected_loss, bo.report.p_fa,
                    bo.report.p_md, bo.report.used_cluster_bound, bo.report.used_fc_bound});

    const HetAverages het = heterogeneous_average(cfg, draws, n_c, p_com, threads);
    rows.push_back({sweep_value, "approx_heterogeneous", het.loss, het.p_fa, het.p_md,
                    het.used_cluster_bound, het.used_fc_bound});
}

std::vector<std::vector<SensorParams>> all_draws(const ExperimentConfig& cfg) {
    std::vector<std::vector<SensorParams>> draws(static_cast<std::size_t>(cfg.realizations));
    for (int r = 0; r < cfg.realizations; ++r)
        draws[static_cast<std::size_t>(r)] = heterogeneous_draw(cfg, r);
    return draws;
}

std::string percent(double x) { return csv_num(x * 100.0) + "%"; }

} // namespace

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const int env = env_threads(); env > 0) return env;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<SensorParams> heterogeneous_draw(const ExperimentConfig& cfg, int r) {
    std::mt19937_64 gen(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(r) + 1)));
    auto unit = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    std::vector<SensorParams> out(static_cast<std::size_t>(cfg.sensors));
    for (auto& s : out) {
        s.p_fa = cfg.p_fa * (1.0 + cfg.het_dev_fa * (2.0 * unit() - 1.0));
        s.p_md = cfg.p_md * (1.0 + cfg.het_dev_md * (2.0 * unit() - 1.0));
        s.p_com = 1.0;
    }
    return out;
}

std::vector<CommProbRow> run_comm_prob(const ExperimentConfig& cfg) {
    std::vector<CommProbRow> rows;
    rows.reserve(cfg.p_com_values.size() * cfg.size_grid.size());
    for (double p : cfg.p_com_values) {
        for (int n : cfg.size_grid) {
            ClusterSpec c;
            c.sensors.assign(static_cast<std::size_t>(n), SensorParams{cfg.p_fa, cfg.p_md, p});
            c.gamma = 0.0;
            c.tie_prob = 0.5;
            rows.push_back({n, p, cluster_comm_prob(c)});
        }
    }
    return rows;
}

CsvTable comm_prob_table(const std::vector<CommProbRow>& rows) {
    CsvTable t;
    t.header = {"n", "p_com_s", "p_com_c"};
    for (const auto& r : rows) t.add_row({csv_num(r.n), csv_num(r.p_com_s), csv_num(r.p_com_c)});
    return t;
}

std::vector<CurveRow> run_sweep_pcom(const ExperimentConfig& cfg, int threads) {
    require_divisible(cfg.sensors, cfg.clusters);
    const auto draws = all_draws(cfg);
    std::vector<CurveRow> rows;
    for (double p_com : cfg.p_com_grid)
        append_five_curves(rows, cfg, p_com, cfg.clusters, p_com, draws, threads);
    return rows;
}

std::vector<CurveRow> run_sweep_nc(const ExperimentConfig& cfg, int threads) {
    std::string offending;
    for (int n_c : cfg.cluster_grid)
        if (cfg.sensors % n_c != 0) offending += (offending.empty() ? "" : ", ") + std::to_string(n_c);
    if (!offending.empty())
        throw ConfigError("'cluster_grid' entries must divide 'sensors' (" +
                          std::to_string(cfg.sensors) + "); offending: " + offending);
    const auto draws = all_draws(cfg);
    std::vector<CurveRow> rows;
    for (int n_c : cfg.cluster_grid)
        append_five_curves(rows, cfg, static_cast<double>(n_c), n_c, cfg.p_com, draws, threads);
    return rows;
}

CsvTable curve_table(const std::vector<CurveRow>& rows, std::uint64_t seed) {
    CsvTable t;
    t.header = {"sweep_value", "curve_name", "loss",
                "p_fa",        "p_md",       "used_cluster_bound",
                "used_fc_bound", "seed"};
    for (const auto& r : rows)
        t.add_row({csv_num(r.sweep_value), r.curve, csv_num(r.loss), csv_num(r.p_fa),
                   csv_num(r.p_md), csv_num(static_cast<int>(r.used_cluster_bound)),
                   csv_num(static_cast<int>(r.used_fc_bound)), csv_num(seed)});
    return t;
}

OptimizeOutcome run_optimize(const ExperimentConfig& cfg, int threads) {
    require_divisible(cfg.sensors, cfg.clusters);
    const SensorParams s{cfg.p_fa, cfg.p_md, cfg.p_com};
    const SystemConfig exact_cfg = scalar_config(cfg, INT_MAX, INT_MAX);
    const SystemConfig bound_cfg = scalar_config(cfg, 0, 0);

    OptimizeOutcome o;
    o.exact_opt = optimize_homogeneous(cfg.sensors, cfg.clusters, s, exact_cfg, cfg.r_p);
    o.bound_opt = optimize_homogeneous(cfg.sensors, cfg.clusters, s, bound_cfg, cfg.r_p);
    o.bound_opt_exact = evaluate_system(deployed_homogeneous(
        cfg, cfg.clusters, s, o.bound_opt.gamma_c, o.bound_opt.tie_prob, INT_MAX, INT_MAX));
    o.relative_gap = (o.bound_opt_exact.expected_loss - o.exact_opt.report.expected_loss) /
                     o.exact_opt.report.expected_loss;

    GaussSeidelConfig gs;
    gs.r_gamma = cfg.r_gamma;
    gs.r_p = cfg.r_p;
    gs.delta_gamma_tol = cfg.delta_gamma_tol;
    gs.delta_p_tol = cfg.delta_p_tol;
    gs.max_iters = cfg.max_iters;
    gs.m_s = cfg.m_s;
    gs.m_c = cfg.m_c;

    constexpr InitScheme kSchemes[] = {InitScheme::optimal_homogeneous, InitScheme::midpoint,
                                       InitScheme::all_h1, InitScheme::all_h0};
    const char* kNames[] = {"optimal_homogeneous", "midpoint", "all_h1", "all_h0"};

    const int r_count = cfg.realizations;
    std::vector<std::array<HetAverages, 4>> per(static_cast<std::size_t>(r_count));
    const SystemConfig sys = scalar_config(cfg, cfg.m_s, cfg.m_c);
    parallel_for(r_count, threads, [&](int r) {
        const auto clusters = equal_clusters(heterogeneous_draw(cfg, r), cfg.clusters, cfg.p_com);
        GaussSeidelOptimizer opt(clusters, sys, gs);
        for (int k = 0; k < 4; ++k) {
            InitialValues init = initial_values(clusters, kSchemes[k], sys, cfg.r_p);
            const HeterogeneousSolution sol =
                opt.run(std::move(init.gammas), std::move(init.tie_probs));
            const EvalReport rep = opt.evaluator().evaluate(sol.gammas, sol.tie_probs);
            per[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = {
                sol.surrogate_loss, rep.p_fa, rep.p_md, rep.used_cluster_bound, rep.used_fc_bound};
        }
    });

    o.schemes.resize(4);
    int wins = 0;
    for (int r = 0; r < r_count; ++r) {
        const auto& row = per[static_cast<std::size_t>(r)];
        double best_other = row[1].loss;
        for (int k = 2; k < 4; ++k) best_other = std::min(best_other, row[k].loss);
        if (row[0].loss <= best_other + kInitWinSlack) ++wins;
        for (int k = 0; k < 4; ++k) {
            auto& st = o.schemes[static_cast<std::size_t>(k)];
            st.mean_loss += row[k].loss;
            st.mean_p_fa += row[k].p_fa;
            st.mean_p_md += row[k].p_md;
            st.used_cluster_bound = st.used_cluster_bound || row[k].used_cluster_bound;
            st.used_fc_bound = st.used_fc_bound || row[k].used_fc_bound;
        }
    }
    for (int k = 0; k < 4; ++k) {
        auto& st = o.schemes[static_cast<std::size_t>(k)];
        st.name = kNames[k];
        st.mean_loss /= r_count;
        st.mean_p_fa /= r_count;
        st.mean_p_md /= r_count;
    }
    o.scheme_one_win_share = static_cast<double>(wins) / r_count;
    return o;
}

CsvTable optimize_table(const OptimizeOutcome& o, std::uint64_t seed) {
    std::vector<CurveRow> rows;
    const auto& ex = o.exact_opt.report;
    rows.push_back({0.0, "exact", ex.expected_loss, ex.p_fa, ex.p_md, ex.used_cluster_bound,
                    ex.used_fc_bound});
    const auto& bo = o.bound_opt.report;
    rows.push_back({0.0, "approx_homogeneous", bo.expected_loss, bo.p_fa, bo.p_md,
                    bo.used_cluster_bound, bo.used_fc_bound});
    const auto& at = o.bound_opt_exact;
    rows.push_back({0.0, "exact_at_approx_thresholds", at.expected_loss, at.p_fa, at.p_md,
                    at.used_cluster_bound, at.used_fc_bound});
    for (std::size_t k = 0; k < o.schemes.size(); ++k) {
        const auto& st = o.schemes[k];
        rows.push_back({static_cast<double>(k + 1), "init_" + st.name, st.mean_loss, st.mean_p_fa,
                        st.mean_p_md, st.used_cluster_bound, st.used_fc_bound});
    }
    return curve_table(rows, seed);
}

std::string optimize_summary(const OptimizeOutcome& o, const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "homogeneous grid search (" << cfg.sensors << " sensors, " << cfg.clusters
        << " clusters, p_com " << csv_num(cfg.p_com) << ")\n";
    out << "  exact optimum:      gamma_c=" << o.exact_opt.gamma_c
        << " tie_prob=" << csv_num(o.exact_opt.tie_prob)
        << " loss=" << csv_num(o.exact_opt.report.expected_loss) << "\n";
    out << "  surrogate optimum:  gamma_c=" << o.bound_opt.gamma_c
        << " tie_prob=" << csv_num(o.bound_opt.tie_prob)
        << " surrogate loss=" << csv_num(o.bound_opt.report.expected_loss)
        << " exact loss=" << csv_num(o.bound_opt_exact.expected_loss) << "\n";
    out << "  relative gap of the surrogate-optimized thresholds: " << percent(o.relative_gap)
        << "\n";
    out << "initialization comparison (" << cfg.realizations << " realizations, seed " << cfg.seed
        << ")\n";
    for (const auto& st : o.schemes)
        out << "  " << st.name << ": mean approximate loss " << csv_num(st.mean_loss) << "\n";
    out << "  optimal_homogeneous leads in " << percent(o.scheme_one_win_share)
        << " of realizations\n";
    return out.str();
}

std::vector<SimulateRow> run_simulate(const ExperimentConfig& cfg, int threads) {
    require_divisible(cfg.sensors, cfg.clusters);
    const SensorParams s{cfg.p_fa, cfg.p_md, cfg.p_com};
    const SystemConfig exact_cfg = scalar_config(cfg, INT_MAX, INT_MAX);
    const HomogeneousSolution opt =
        optimize_homogeneous(cfg.sensors, cfg.clusters, s, exact_cfg, cfg.r_p);
    const SystemConfig sys = deployed_homogeneous(cfg, cfg.clusters, s, opt.gamma_c, opt.tie_prob,
                                                  INT_MAX, INT_MAX);
    const EvalReport exact = evaluate_system(sys);
    const MonteCarloResult mc =
        monte_carlo(sys, cfg.trials, cfg.seed, threads, EstimatorPolicy::exact_only);

    std::vector<SimulateRow> rows;
    rows.push_back({"trials", static_cast<double>(mc.trials), 0.0, static_cast<double>(cfg.trials)});
    rows.push_back({"p_fa", mc.p_fa.mean, mc.p_fa.std_error, exact.p_fa});
    rows.push_back({"p_md", mc.p_md.mean, mc.p_md.std_error, exact.p_md});
    rows.push_back({"expected_loss", mc.loss.mean, mc.loss.std_error, exact.expected_loss});
    rows.push_back({"avg_communicating", mc.avg_communicating.mean, mc.avg_communicating.std_error,
                    expected_communicating_clusters(sys.clusters)});
    return rows;
}

CsvTable simulate_table(const std::vector<SimulateRow>& rows, std::uint64_t seed) {
    CsvTable t;
    t.header = {"quantity", "value", "std_error", "exact", "seed"};
    for (const auto& r : rows) {
        const bool integral = r.quantity == "trials";
        auto num = [integral](double v) {
            return integral ? csv_num(static_cast<std::uint64_t>(v)) : csv_num(v);
        };
        t.add_row({r.quantity, num(r.value), num(r.std_error), num(r.exact), csv_num(seed)});
    }
    return t;
}

} // namespace cloudcluster
