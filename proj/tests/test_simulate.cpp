#include <doctest.h>

#include <cmath>
#include <vector>

#include "cloudcluster/exact.hpp"
#include "cloudcluster/simulate.hpp"

using namespace cloudcluster;

namespace {

SystemConfig small_system() {
    SystemConfig cfg;
    const SensorWeights w = sensor_weights({0.2, 0.35, 1.0});
    ClusterSpec c;
    c.sensors.assign(5, SensorParams{0.2, 0.35, 0.4});
    c.gamma = count_to_weighted_threshold(3.0, 5, w);
    c.tie_prob = 0.25;
    cfg.clusters.assign(3, c);
    cfg.p1 = 0.65;
    cfg.loss_fa = 100.0;
    cfg.loss_md = 200.0;
    return cfg;
}

bool same_estimate(const McEstimate& a, const McEstimate& b) {
    return a.mean == b.mean && a.std_error == b.std_error && a.trials == b.trials;
}

} // namespace

TEST_CASE("identical seeds reproduce identical estimates") {
    const SystemConfig cfg = small_system();
    const MonteCarloResult a = monte_carlo(cfg, 20000, 9001, 1);
    const MonteCarloResult b = monte_carlo(cfg, 20000, 9001, 1);
    CHECK(same_estimate(a.loss, b.loss));
    CHECK(same_estimate(a.p_fa, b.p_fa));
    CHECK(same_estimate(a.p_md, b.p_md));
    CHECK(same_estimate(a.avg_communicating, b.avg_communicating));
    CHECK(a.trials_h0 == b.trials_h0);
    CHECK(a.trials_h1 == b.trials_h1);

    const MonteCarloResult c = monte_carlo(cfg, 20000, 9002, 1);
    CHECK(c.loss.mean != a.loss.mean);
}

TEST_CASE("results are independent of the thread partitioning") {
    const SystemConfig cfg = small_system();
    const MonteCarloResult t1 = monte_carlo(cfg, 30000, 555, 1);
    const MonteCarloResult t3 = monte_carlo(cfg, 30000, 555, 3);
    const MonteCarloResult t8 = monte_carlo(cfg, 30000, 555, 8);
    CHECK(same_estimate(t1.loss, t3.loss));
    CHECK(same_estimate(t1.p_fa, t3.p_fa));
    CHECK(same_estimate(t1.p_md, t3.p_md));
    CHECK(same_estimate(t1.avg_communicating, t3.avg_communicating));
    CHECK(same_estimate(t1.loss, t8.loss));
    CHECK(t1.trials_h0 == t3.trials_h0);
    CHECK(t1.trials_h0 == t8.trials_h0);
}

TEST_CASE("trial outcomes depend only on the seed and trial index") {
    const SimulationPlan plan = make_simulation_plan(small_system());
    const TrialOutcome a = run_trial(plan, 123, 42);
    const TrialOutcome b = run_trial(plan, 123, 42);
    CHECK(a.truth == b.truth);
    CHECK(a.fc_decision == b.fc_decision);
    CHECK(a.num_communicating == b.num_communicating);
    CHECK(a.loss == b.loss);

    int diff = 0;
    for (std::uint64_t t = 0; t < 64; ++t) {
        const TrialOutcome x = run_trial(plan, 123, t);
        const TrialOutcome y = run_trial(plan, 124, t);
        diff += (x.truth != y.truth || x.fc_decision != y.fc_decision ||
                 x.num_communicating != y.num_communicating)
                    ? 1
                    : 0;
    }
    CHECK(diff > 0);
}

TEST_CASE("per-trial loss bookkeeping is coherent with the conditional rates") {
    const SystemConfig cfg = small_system();
    const MonteCarloResult r = monte_carlo(cfg, 50000, 31337, 2);
    CHECK(r.trials_h0 + r.trials_h1 == r.trials);
    const double reconstructed = (r.p_fa.mean * static_cast<double>(r.trials_h0) * cfg.loss_fa +
                                  r.p_md.mean * static_cast<double>(r.trials_h1) * cfg.loss_md) /
                                 static_cast<double>(r.trials);
    CHECK(r.loss.mean == doctest::Approx(reconstructed).epsilon(1e-9));
}

TEST_CASE("estimates agree with the exact engine within sampling error") {
    const SystemConfig cfg = small_system();
    const EvalReport exact = evaluate_system(cfg, EstimatorPolicy::exact_only);
    const MonteCarloResult r = monte_carlo(cfg, 200000, 2024, 2, EstimatorPolicy::exact_only);

    CHECK(std::fabs(r.p_fa.mean - exact.p_fa) <= 4.0 * r.p_fa.std_error);
    CHECK(std::fabs(r.p_md.mean - exact.p_md) <= 4.0 * r.p_md.std_error);
    CHECK(std::fabs(r.loss.mean - exact.expected_loss) <= 4.0 * r.loss.std_error);

    const double eta = expected_communicating_clusters(cfg.clusters);
    CHECK(std::fabs(r.avg_communicating.mean - eta) <= 4.0 * r.avg_communicating.std_error);
}

TEST_CASE("single-trial runs report a zero standard error by convention") {
    const MonteCarloResult r = monte_carlo(small_system(), 1, 7, 1);
    CHECK(r.trials == 1);
    CHECK(r.loss.std_error == 0.0);
    CHECK(r.avg_communicating.std_error == 0.0);
}

TEST_CASE("the simulation plan deploys the evaluator's fusion rule") {
    const SystemConfig cfg = small_system();
    const SimulationPlan plan = make_simulation_plan(cfg, EstimatorPolicy::exact_only);
    REQUIRE(plan.clusters.size() == cfg.clusters.size());

    const SystemEvaluator eval(cfg, EstimatorPolicy::exact_only);
    CHECK(plan.fc_gamma == doctest::Approx(fc_threshold(cfg)).epsilon(1e-15));
    for (std::size_t j = 0; j < plan.clusters.size(); ++j) {
        const ClusterQuality q =
            eval.cluster_quality(j, cfg.clusters[j].gamma, cfg.clusters[j].tie_prob);
        const SensorWeights w = cluster_weights(q);
        CHECK(plan.clusters[j].w1_c == doctest::Approx(w.w1).epsilon(1e-15));
        CHECK(plan.clusters[j].w0_c == doctest::Approx(w.w0).epsilon(1e-15));
        CHECK(plan.clusters[j].gamma == cfg.clusters[j].gamma);
        CHECK(plan.clusters[j].tie_prob == cfg.clusters[j].tie_prob);
    }

    // the bound-dispatched plan deploys the bound-derived qualities instead
    SystemConfig forced = cfg;
    forced.m_s = 1;
    const SimulationPlan bplan = make_simulation_plan(forced);
    const SystemEvaluator beval(forced);
    const ClusterQuality bq =
        beval.cluster_quality(0, forced.clusters[0].gamma, forced.clusters[0].tie_prob);
    const SensorWeights bw = cluster_weights(bq);
    CHECK(bplan.clusters[0].w1_c == doctest::Approx(bw.w1).epsilon(1e-15));
    CHECK(bplan.clusters[0].w0_c == doctest::Approx(bw.w0).epsilon(1e-15));
}

TEST_CASE("degenerate request counts are rejected") {
    CHECK_THROWS_AS((void)monte_carlo(small_system(), 0, 1, 1), DomainError);
}
