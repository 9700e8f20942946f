#include "cloudcluster/simulate.hpp"

#include <cmath>
#include <limits>
#include <thread>

#include "cloudcluster/errors.hpp"

namespace cloudcluster {
namespace {

std::uint64_t fmix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
};

struct Counts {
    std::uint64_t n0 = 0, n1 = 0;
    std::uint64_t fa = 0, md = 0;
    std::uint64_t comm_sum = 0, comm_sq = 0;
    void add(const Counts& o) {
        n0 += o.n0;
        n1 += o.n1;
        fa += o.fa;
        md += o.md;
        comm_sum += o.comm_sum;
        comm_sq += o.comm_sq;
    }
};

Counts run_range(const SimulationPlan& plan, std::uint64_t seed, std::uint64_t begin,
                 std::uint64_t end) {
    Counts c;
    for (std::uint64_t t = begin; t < end; ++t) {
        const TrialOutcome o = run_trial(plan, seed, t);
        if (o.truth == 0) {
            ++c.n0;
            c.fa += o.fc_decision == 1;
        } else {
            ++c.n1;
            c.md += o.fc_decision == 0;
        }
        c.comm_sum += static_cast<std::uint64_t>(o.num_communicating);
        c.comm_sq += static_cast<std::uint64_t>(o.num_communicating) *
                     static_cast<std::uint64_t>(o.num_communicating);
    }
    return c;
}

// sample standard deviation of a {0,1} variable over n draws, divided by
// sqrt(n); fewer than two draws report 0 by convention
double bernoulli_se(std::uint64_t hits, std::uint64_t n) {
    if (n < 2) return 0.0;
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n - 1));
}

} // namespace

SimulationPlan make_simulation_plan(const SystemConfig& config, EstimatorPolicy policy) {
    const SystemEvaluator eval(config, policy);
    SimulationPlan plan;
    plan.fc_gamma = eval.fc_gamma();
    plan.p1 = config.p1;
    plan.loss_fa = config.loss_fa;
    plan.loss_md = config.loss_md;
    plan.clusters.reserve(config.clusters.size());
    for (std::size_t j = 0; j < config.clusters.size(); ++j) {
        const ClusterSpec& c = config.clusters[j];
        SimulationPlan::ClusterPlan cp;
        cp.gamma = c.gamma;
        cp.tie_prob = c.tie_prob;
        for (const SensorParams& s : c.sensors) {
            cp.p_fa.push_back(s.p_fa);
            cp.p_md.push_back(s.p_md);
            cp.p_com.push_back(s.p_com);
            cp.w.push_back(sensor_weights(s));
        }
        const SensorWeights wc =
            cluster_weights(eval.cluster_quality(j, c.gamma, c.tie_prob));
        cp.w1_c = wc.w1;
        cp.w0_c = wc.w0;
        plan.clusters.push_back(std::move(cp));
    }
    return plan;
}

TrialOutcome run_trial(const SimulationPlan& plan, std::uint64_t seed, std::uint64_t trial) {
    SplitMix64 rng{fmix64(seed ^ (0x9e3779b97f4a7c15ULL * (trial + 1)))};
    TrialOutcome out;
    out.truth = rng.next_unit() < plan.p1 ? 1 : 0;

    // drawing order: all sensor bits, then all link states, then tie draws
    // as needed
    thread_local std::vector<double> sums;
    thread_local std::vector<std::uint8_t> conn;
    sums.assign(plan.clusters.size(), 0.0);
    conn.assign(plan.clusters.size(), 0);

    for (std::size_t j = 0; j < plan.clusters.size(); ++j) {
        const auto& cp = plan.clusters[j];
        double sum = 0.0;
        for (std::size_t i = 0; i < cp.p_fa.size(); ++i) {
            const double p_one = out.truth == 1 ? 1.0 - cp.p_md[i] : cp.p_fa[i];
            sum += rng.next_unit() < p_one ? cp.w[i].w1 : -cp.w[i].w0;
        }
        sums[j] = sum;
    }
    for (std::size_t j = 0; j < plan.clusters.size(); ++j) {
        const auto& cp = plan.clusters[j];
        bool connected = false;
        for (std::size_t i = 0; i < cp.p_com.size(); ++i)
            connected |= rng.next_unit() < cp.p_com[i];
        conn[j] = connected;
    }

    double fc_sum = 0.0;
    for (std::size_t j = 0; j < plan.clusters.size(); ++j) {
        const auto& cp = plan.clusters[j];
        const int cmp = compare_weighted(sums[j], cp.gamma);
        int z;
        if (cmp > 0)
            z = 1;
        else if (cmp < 0)
            z = 0;
        else
            z = rng.next_unit() < 1.0 - cp.tie_prob ? 1 : 0;
        if (conn[j]) {
            ++out.num_communicating;
            fc_sum += z ? cp.w1_c : -cp.w0_c;
        }
    }
    out.fc_decision = compare_weighted(fc_sum, plan.fc_gamma) >= 0 ? 1 : 0;
    if (out.truth == 0 && out.fc_decision == 1)
        out.loss = plan.loss_fa;
    else if (out.truth == 1 && out.fc_decision == 0)
        out.loss = plan.loss_md;
    return out;
}

MonteCarloResult monte_carlo(const SystemConfig& config, std::uint64_t trials, std::uint64_t seed,
                             int threads, EstimatorPolicy policy) {
    if (trials == 0) throw DomainError("at least one trial is required");
    const SimulationPlan plan = make_simulation_plan(config, policy);

    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned want = threads <= 0 ? hw : static_cast<unsigned>(threads);
    const std::uint64_t workers = std::min<std::uint64_t>(want, trials);

    Counts total;
    if (workers <= 1) {
        total = run_range(plan, seed, 0, trials);
    } else {
        std::vector<Counts> parts(workers);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::uint64_t chunk = trials / workers;
        const std::uint64_t rem = trials % workers;
        std::uint64_t begin = 0;
        for (std::uint64_t w = 0; w < workers; ++w) {
            const std::uint64_t end = begin + chunk + (w < rem ? 1 : 0);
            pool.emplace_back([&plan, seed, begin, end, &parts, w] {
                parts[w] = run_range(plan, seed, begin, end);
            });
            begin = end;
        }
        for (auto& th : pool) th.join();
        for (const Counts& p : parts) total.add(p);
    }

    MonteCarloResult r;
    r.trials = trials;
    r.seed = seed;
    r.trials_h0 = total.n0;
    r.trials_h1 = total.n1;

    r.p_fa = {total.n0 ? static_cast<double>(total.fa) / total.n0
                       : std::numeric_limits<double>::quiet_NaN(),
              bernoulli_se(total.fa, total.n0), total.n0, seed};
    r.p_md = {total.n1 ? static_cast<double>(total.md) / total.n1
                       : std::numeric_limits<double>::quiet_NaN(),
              bernoulli_se(total.md, total.n1), total.n1, seed};

    const double lf = plan.loss_fa, lm = plan.loss_md;
    const double loss_mean = (total.fa * lf + total.md * lm) / static_cast<double>(trials);
    double loss_se = 0.0;
    if (trials >= 2) {
        const double sq = (total.fa * lf * lf + total.md * lm * lm);
        const double var =
            (sq - trials * loss_mean * loss_mean) / static_cast<double>(trials - 1);
        loss_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(trials));
    }
    r.loss = {loss_mean, loss_se, trials, seed};

    const double comm_mean = static_cast<double>(total.comm_sum) / static_cast<double>(trials);
    double comm_se = 0.0;
    if (trials >= 2) {
        const double var = (static_cast<double>(total.comm_sq) - trials * comm_mean * comm_mean) /
                           static_cast<double>(trials - 1);
        comm_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(trials));
    }
    r.avg_communicating = {comm_mean, comm_se, trials, seed};
    return r;
}

} // namespace cloudcluster
