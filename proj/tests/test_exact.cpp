#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cloudcluster/exact.hpp"

using namespace cloudcluster;

namespace {

ClusterSpec homogeneous_cluster(int n, double p_fa, double p_md, double p_com, double gamma,
                                double tie) {
    ClusterSpec c;
    c.sensors.assign(static_cast<std::size_t>(n), SensorParams{p_fa, p_md, p_com});
    c.gamma = gamma;
    c.tie_prob = tie;
    return c;
}

// Independent reference: direct sum over all member-bit vectors.
ErrorPair brute_cluster_errors(const ClusterSpec& c) {
    const int n = static_cast<int>(c.sensors.size());
    std::vector<SensorWeights> w;
    for (const auto& s : c.sensors) w.push_back(sensor_weights(s));
    double fa = 0.0, md = 0.0;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        double sum = 0.0, pr0 = 1.0, pr1 = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool one = bits & (1u << i);
            sum += one ? w[i].w1 : -w[i].w0;
            pr0 *= one ? c.sensors[i].p_fa : 1.0 - c.sensors[i].p_fa;
            pr1 *= one ? 1.0 - c.sensors[i].p_md : c.sensors[i].p_md;
        }
        const int cmp = compare_weighted(sum, c.gamma);
        if (cmp > 0) {
            fa += pr0;
        } else if (cmp == 0) {
            fa += (1.0 - c.tie_prob) * pr0;
            md += c.tie_prob * pr1;
        } else {
            md += pr1;
        }
    }
    return {fa, md};
}

// Independent reference for the fusion stage: per cluster, branch over
// silent / forwarded 1 / forwarded 0 and accumulate the joint probability.
ErrorPair brute_fc_errors(const std::vector<ClusterQuality>& qs, double gamma) {
    const int m = static_cast<int>(qs.size());
    std::vector<SensorWeights> w;
    for (const auto& q : qs) w.push_back(cluster_weights(q));
    double fa = 0.0, md_keep = 0.0;
    std::vector<int> branch(static_cast<std::size_t>(m), 0);
    for (std::uint64_t code = 0; code < static_cast<std::uint64_t>(std::pow(3.0, m)); ++code) {
        std::uint64_t rest = code;
        double sum = 0.0, pr0 = 1.0, pr1 = 1.0;
        for (int j = 0; j < m; ++j) {
            const int b = static_cast<int>(rest % 3);
            rest /= 3;
            const double pc = qs[j].p_com_c;
            if (b == 0) {
                pr0 *= 1.0 - pc;
                pr1 *= 1.0 - pc;
            } else if (b == 1) {
                sum += w[j].w1;
                pr0 *= pc * qs[j].p_fa_c;
                pr1 *= pc * (1.0 - qs[j].p_md_c);
            } else {
                sum -= w[j].w0;
                pr0 *= pc * (1.0 - qs[j].p_fa_c);
                pr1 *= pc * qs[j].p_md_c;
            }
        }
        if (compare_weighted(sum, gamma) >= 0) {
            fa += pr0;
        } else {
            md_keep += pr1;
        }
    }
    return {fa, md_keep};
}

} // namespace

TEST_CASE("count and weighted thresholds convert both ways") {
    const SensorWeights w = sensor_weights({0.2, 0.35, 1.0});
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    for (int i = 0; i < 100; ++i) {
        const double c = u(rng);
        const double g = count_to_weighted_threshold(c, 6, w);
        CHECK(weighted_to_count_threshold(g, 6, w) == doctest::Approx(c).epsilon(1e-12));
    }
    CHECK(count_to_weighted_threshold(0.0, 4, w) == doctest::Approx(-4.0 * w.w0).epsilon(1e-15));
    CHECK(count_to_weighted_threshold(4.0, 4, w) == doctest::Approx(4.0 * w.w1).epsilon(1e-15));
}

TEST_CASE("weighted comparison tolerates relative rounding dust") {
    CHECK(compare_weighted(1.0, 1.0 + 1e-12) == 0);
    CHECK(compare_weighted(1.0, 1.0 + 1e-6) < 0);
    CHECK(compare_weighted(1.0 + 1e-6, 1.0) > 0);
    CHECK(compare_weighted(1e9, 1e9 * (1.0 + 1e-11)) == 0);
    CHECK(compare_weighted(-2.0, 2.0) < 0);
}

TEST_CASE("three-sensor homogeneous cluster against hand-computed binomials") {
    ErrorPair e = cluster_errors_homogeneous({3, 0.2, 0.35, 1.5, 0.0});
    CHECK(e.p_fa == doctest::Approx(0.104).epsilon(1e-13));
    CHECK(e.p_md == doctest::Approx(0.28175).epsilon(1e-13));

    // integer threshold: the tie atom splits between the hypotheses
    e = cluster_errors_homogeneous({3, 0.2, 0.35, 2.0, 0.25});
    CHECK(e.p_fa == doctest::Approx(0.08).epsilon(1e-13));
    CHECK(e.p_md == doctest::Approx(0.39265625).epsilon(1e-13));

    e = cluster_errors_homogeneous({3, 0.2, 0.35, 0.0, 0.0});
    CHECK(e.p_fa == doctest::Approx(1.0));
    CHECK(e.p_md == doctest::Approx(0.0));
}

TEST_CASE("tie probability enters both error rates affinely") {
    const HomogeneousClusterSpec base{5, 0.15, 0.3, 3.0, 0.0};
    auto at = [&](double p) {
        HomogeneousClusterSpec s = base;
        s.tie_prob = p;
        return cluster_errors_homogeneous(s);
    };
    const ErrorPair lo = at(0.0), mid = at(0.5), hi = at(1.0);
    CHECK(mid.p_fa == doctest::Approx(0.5 * (lo.p_fa + hi.p_fa)).epsilon(1e-13));
    CHECK(mid.p_md == doctest::Approx(0.5 * (lo.p_md + hi.p_md)).epsilon(1e-13));
    // with tie_prob = 1 the atom counts fully toward H0 at the FA side
    CHECK(hi.p_fa < lo.p_fa);
    CHECK(hi.p_md > lo.p_md);
}

TEST_CASE("two heterogeneous sensors enumerated by hand") {
    ClusterSpec c;
    c.sensors = {{0.2, 0.35, 0.5}, {0.1, 0.3, 0.5}};
    c.gamma = 1.0;
    c.tie_prob = 0.5;
    ErrorPair e = cluster_errors_enumerate(c);
    CHECK(e.p_fa == doctest::Approx(0.1).epsilon(1e-13));
    CHECK(e.p_md == doctest::Approx(0.3).epsilon(1e-13));

    // threshold exactly on the (1,0) outcome atom
    const SensorWeights wa = sensor_weights(c.sensors[0]);
    const SensorWeights wb = sensor_weights(c.sensors[1]);
    c.gamma = wa.w1 - wb.w0;
    c.tie_prob = 0.25;
    e = cluster_errors_enumerate(c);
    CHECK(e.p_fa == doctest::Approx(0.235).epsilon(1e-13));
    CHECK(e.p_md == doctest::Approx(0.15375).epsilon(1e-13));
}

TEST_CASE("single sensor passes its raw bit through for interior thresholds") {
    ClusterSpec c;
    c.sensors = {{0.2, 0.35, 1.0}};
    c.gamma = 0.1;
    c.tie_prob = 0.0;
    const ErrorPair e = cluster_errors_enumerate(c);
    CHECK(e.p_fa == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(e.p_md == doctest::Approx(0.35).epsilon(1e-14));
}

TEST_CASE("forcing a cluster decision through the range endpoints") {
    ClusterSpec c;
    c.sensors = {{0.2, 0.35, 1.0}};
    c.gamma = ell_max(c);
    c.tie_prob = 1.0;
    ErrorPair e = cluster_errors_enumerate(c);
    CHECK(e.p_fa == doctest::Approx(0.0));
    CHECK(e.p_md == doctest::Approx(1.0));

    c.gamma = ell_min(c);
    c.tie_prob = 0.0;
    e = cluster_errors_enumerate(c);
    CHECK(e.p_fa == doctest::Approx(1.0));
    CHECK(e.p_md == doctest::Approx(0.0));
}

TEST_CASE("enumeration agrees with the brute-force reference on heterogeneous clusters") {
    std::mt19937 rng(2301);
    std::uniform_real_distribution<double> up(0.05, 0.45);
    std::uniform_real_distribution<double> uc(0.05, 0.95);
    std::uniform_real_distribution<double> ug(0.0, 1.0);
    std::uniform_int_distribution<int> un(1, 8);
    for (int it = 0; it < 200; ++it) {
        ClusterSpec c;
        const int n = un(rng);
        for (int i = 0; i < n; ++i) c.sensors.push_back({up(rng), up(rng), uc(rng)});
        const double lo = ell_min(c), hi = ell_max(c);
        c.gamma = lo + ug(rng) * (hi - lo);
        c.tie_prob = ug(rng);
        const ErrorPair got = cluster_errors_enumerate(c);
        const ErrorPair want = brute_cluster_errors(c);
        CHECK(got.p_fa == doctest::Approx(want.p_fa).epsilon(1e-12));
        CHECK(got.p_md == doctest::Approx(want.p_md).epsilon(1e-12));
    }
}

TEST_CASE("enumeration matches the binomial closed form on homogeneous clusters") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> up(0.05, 0.45);
    std::uniform_real_distribution<double> uc(0.05, 0.95);
    std::uniform_real_distribution<double> ug(-0.25, 1.25);
    std::uniform_int_distribution<int> un(1, 12);
    std::uniform_int_distribution<int> tie3(0, 2);
    for (int it = 0; it < 200; ++it) {
        const int n = un(rng);
        const double p_fa = up(rng), p_md = up(rng);
        const SensorWeights w = sensor_weights({p_fa, p_md, 1.0});
        const double gamma_c = std::clamp(ug(rng) * n, 0.0, static_cast<double>(n));
        const double tie = tie3(rng) == 0 ? 0.0 : (tie3(rng) == 1 ? 1.0 : 0.37);
        const ErrorPair closed = cluster_errors_homogeneous({n, p_fa, p_md, gamma_c, tie});
        const ClusterSpec c = homogeneous_cluster(
            n, p_fa, p_md, uc(rng), count_to_weighted_threshold(gamma_c, n, w), tie);
        const ErrorPair enumd = cluster_errors_enumerate(c);
        CHECK(enumd.p_fa == doctest::Approx(closed.p_fa).epsilon(1e-12));
        CHECK(enumd.p_md == doctest::Approx(closed.p_md).epsilon(1e-12));
    }
}

TEST_CASE("raising the threshold trades false alarms for misses monotonically") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> up(0.05, 0.45);
    for (int it = 0; it < 40; ++it) {
        ClusterSpec c;
        for (int i = 0; i < 6; ++i) c.sensors.push_back({up(rng), up(rng), 0.5});
        const double lo = ell_min(c), hi = ell_max(c);
        ErrorPair prev = {1.0, 0.0};
        for (int k = 0; k <= 24; ++k) {
            c.gamma = lo + (hi - lo) * k / 24.0;
            c.tie_prob = 0.5;
            const ErrorPair e = cluster_errors_enumerate(c);
            CHECK(e.p_fa <= prev.p_fa + 1e-12);
            CHECK(e.p_md >= prev.p_md - 1e-12);
            prev = e;
        }
    }
}

TEST_CASE("distributions normalize and the size caps trip") {
    ClusterSpec c = homogeneous_cluster(10, 0.2, 0.3, 0.5, 0.0, 0.0);
    const WeightedSumDistribution d = cluster_sum_distribution(c);
    CHECK(d.total0() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.total1() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)cluster_sum_distribution(homogeneous_cluster(25, 0.2, 0.3, 0.5, 0, 0)),
                    SizeCapError);
    CHECK_THROWS_AS((void)cluster_errors_enumerate(homogeneous_cluster(25, 0.2, 0.3, 0.5, 0, 0)),
                    SizeCapError);

    const std::vector<ClusterQuality> many(17, ClusterQuality{0.2, 0.3, 0.5, false});
    CHECK_THROWS_AS((void)fc_sum_distribution(many), SizeCapError);
    CHECK_THROWS_AS((void)fc_errors_enumerate(many, 0.0), SizeCapError);

    const std::vector<ClusterQuality> few(3, ClusterQuality{0.2, 0.3, 0.5, false});
    const WeightedSumDistribution f = fc_sum_distribution(few);
    CHECK(f.total0() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.total1() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric fusion stage against the hand enumeration") {
    const ClusterQuality q{0.2, 0.2, 0.5, false};
    const ErrorPair closed = fc_errors_homogeneous(3, q, 0.0);
    CHECK(closed.p_fa == doctest::Approx(0.348).epsilon(1e-13));
    CHECK(closed.p_md == doctest::Approx(0.103).epsilon(1e-13));

    const std::vector<ClusterQuality> qs(3, q);
    const ErrorPair enumd = fc_errors_enumerate(qs, 0.0);
    CHECK(enumd.p_fa == doctest::Approx(0.348).epsilon(1e-13));
    CHECK(enumd.p_md == doctest::Approx(0.103).epsilon(1e-13));
}

TEST_CASE("heterogeneous fusion stage against the hand enumeration") {
    const std::vector<ClusterQuality> qs = {{0.2, 0.3, 0.6, false}, {0.1, 0.25, 0.8, false}};
    const ErrorPair e = fc_errors_enumerate(qs, 0.4);
    CHECK(e.p_fa == doctest::Approx(0.104).epsilon(1e-13));
    CHECK(e.p_md == doctest::Approx(0.316).epsilon(1e-13));
}

TEST_CASE("fusion enumeration agrees with the brute-force reference") {
    std::mt19937 rng(314);
    std::uniform_real_distribution<double> up(0.05, 0.45);
    std::uniform_real_distribution<double> uc(0.05, 0.95);
    std::uniform_real_distribution<double> ug(-3.0, 3.0);
    std::uniform_int_distribution<int> um(1, 5);
    for (int it = 0; it < 100; ++it) {
        std::vector<ClusterQuality> qs;
        const int m = um(rng);
        for (int j = 0; j < m; ++j) qs.push_back({up(rng), up(rng), uc(rng), false});
        const double gamma = ug(rng);
        const ErrorPair got = fc_errors_enumerate(qs, gamma);
        const ErrorPair want = brute_fc_errors(qs, gamma);
        CHECK(got.p_fa == doctest::Approx(want.p_fa).epsilon(1e-12));
        CHECK(got.p_md == doctest::Approx(want.p_md).epsilon(1e-12));
    }
}

TEST_CASE("fusion enumeration matches the closed form for identical qualities") {
    std::mt19937 rng(2718);
    std::uniform_real_distribution<double> up(0.05, 0.45);
    std::uniform_real_distribution<double> uc(0.05, 0.95);
    std::uniform_real_distribution<double> ug(-4.0, 4.0);
    std::uniform_int_distribution<int> um(1, 8);
    for (int it = 0; it < 100; ++it) {
        const ClusterQuality q{up(rng), up(rng), uc(rng), false};
        const int m = um(rng);
        const double gamma = ug(rng);
        const ErrorPair closed = fc_errors_homogeneous(m, q, gamma);
        const ErrorPair enumd = fc_errors_enumerate(std::vector<ClusterQuality>(m, q), gamma);
        CHECK(enumd.p_fa == doctest::Approx(closed.p_fa).epsilon(1e-12));
        CHECK(enumd.p_md == doctest::Approx(closed.p_md).epsilon(1e-12));
    }
}

TEST_CASE("silent systems decide from the empty sum alone") {
    const std::vector<ClusterQuality> qs(4, ClusterQuality{0.2, 0.3, 0.0, false});
    ErrorPair e = fc_errors_enumerate(qs, -0.5);
    CHECK(e.p_fa == doctest::Approx(1.0));
    CHECK(e.p_md == doctest::Approx(0.0));
    e = fc_errors_enumerate(qs, 0.5);
    CHECK(e.p_fa == doctest::Approx(0.0));
    CHECK(e.p_md == doctest::Approx(1.0));
}

TEST_CASE("deterministic cluster qualities are representable at the fusion stage") {
    // (1,0) and (0,1) forward an uninformative bit; only mixed boundaries
    // need a diverging weight
    const std::vector<ClusterQuality> qs = {{1.0, 0.0, 0.7, false}, {0.2, 0.3, 0.6, false}};
    CHECK_NOTHROW((void)fc_errors_enumerate(qs, 0.2));
    const std::vector<ClusterQuality> qs2 = {{0.0, 1.0, 0.7, false}, {0.2, 0.3, 0.6, false}};
    CHECK_NOTHROW((void)fc_errors_enumerate(qs2, 0.2));

    const std::vector<ClusterQuality> bad = {{0.0, 0.3, 0.7, false}};
    CHECK_THROWS_AS((void)fc_errors_enumerate(bad, 0.2), DegenerateError);

    // rounding dust next to a boundary is dropped rather than diverging
    const std::vector<ClusterQuality> dusty = {{0.0, 1.0 - 1e-16, 0.7, false},
                                               {0.2, 0.3, 0.6, false}};
    CHECK_NOTHROW((void)fc_errors_enumerate(dusty, 0.2));
}

TEST_CASE("system evaluation matches the independent end-to-end reference") {
    SystemConfig cfg;
    const SensorWeights w = sensor_weights({0.2, 0.35, 1.0});
    cfg.clusters.assign(
        2, homogeneous_cluster(4, 0.2, 0.35, 0.3, count_to_weighted_threshold(2.0, 4, w), 0.37));
    cfg.p1 = 0.65;
    cfg.loss_fa = 100.0;
    cfg.loss_md = 200.0;

    const SystemEvaluator eval(cfg);
    const ClusterQuality q = eval.cluster_quality(0, cfg.clusters[0].gamma, 0.37);
    CHECK(q.p_fa_c == doctest::Approx(0.123968).epsilon(1e-13));
    CHECK(q.p_md_c == doctest::Approx(0.241380125).epsilon(1e-13));
    CHECK(q.p_com_c == doctest::Approx(0.7599).epsilon(1e-13));

    const EvalReport rep = evaluate_system(cfg);
    CHECK(rep.p_fa == doctest::Approx(0.5568478812417006).epsilon(1e-12));
    CHECK(rep.p_md == doctest::Approx(0.03364464147592343).epsilon(1e-12));
    CHECK(rep.expected_loss == doctest::Approx(23.863479235329567).epsilon(1e-12));
    CHECK_FALSE(rep.used_cluster_bound);
    CHECK_FALSE(rep.used_fc_bound);
}

TEST_CASE("large homogeneous system matches the independent reference") {
    SystemConfig cfg;
    const SensorWeights w = sensor_weights({0.2, 0.35, 1.0});
    cfg.clusters.assign(
        10, homogeneous_cluster(50, 0.2, 0.35, 0.1, count_to_weighted_threshold(35.0, 50, w),
                                0.37));
    cfg.p1 = 0.65;
    cfg.loss_fa = 100.0;
    cfg.loss_md = 200.0;

    const EvalReport rep = evaluate_system(cfg, EstimatorPolicy::exact_only);
    CHECK(rep.p_md == doctest::Approx(0.06044137806646044).epsilon(1e-9));
    CHECK(rep.expected_loss == doctest::Approx(7.857379148782231).epsilon(1e-9));
    CHECK_FALSE(rep.used_cluster_bound);

    const SystemEvaluator eval(cfg, EstimatorPolicy::exact_only);
    const ClusterQuality q = eval.cluster_quality(0, cfg.clusters[0].gamma, 0.37);
    CHECK(q.p_md_c == doctest::Approx(0.7540567269549856).epsilon(1e-11));
    CHECK(q.p_com_c == doctest::Approx(0.9948462247926799).epsilon(1e-13));
}

TEST_CASE("evaluator dispatch honors the size switches") {
    SystemConfig cfg;
    const SensorWeights w = sensor_weights({0.2, 0.35, 1.0});
    cfg.clusters.assign(
        3, homogeneous_cluster(6, 0.2, 0.35, 0.4, count_to_weighted_threshold(4.0, 6, w), 0.0));
    cfg.p1 = 0.65;
    cfg.loss_fa = 100.0;
    cfg.loss_md = 200.0;

    CHECK_FALSE(evaluate_system(cfg).used_cluster_bound);

    SystemConfig small_ms = cfg;
    small_ms.m_s = 5;
    const EvalReport b = evaluate_system(small_ms);
    CHECK(b.used_cluster_bound);
    CHECK_FALSE(b.used_fc_bound);
    const SystemEvaluator be(small_ms);
    CHECK(be.cluster_uses_bound(0));
    CHECK_THROWS_AS((void)be.cluster_error_atoms(0, 0.0), DomainError);

    SystemConfig small_mc = cfg;
    small_mc.m_c = 2;
    const EvalReport f = evaluate_system(small_mc);
    CHECK(f.used_fc_bound);
    CHECK_FALSE(f.used_cluster_bound);

    // exact_only overrides the switches entirely
    SystemConfig both = cfg;
    both.m_s = 1;
    both.m_c = 1;
    const EvalReport ex = evaluate_system(both, EstimatorPolicy::exact_only);
    CHECK_FALSE(ex.used_cluster_bound);
    CHECK_FALSE(ex.used_fc_bound);
    CHECK(ex.expected_loss == doctest::Approx(evaluate_system(cfg).expected_loss).epsilon(1e-14));
}

TEST_CASE("stored-threshold evaluation equals the override path") {
    SystemConfig cfg;
    cfg.clusters = {homogeneous_cluster(3, 0.2, 0.3, 0.5, 0.4, 0.2),
                    homogeneous_cluster(4, 0.15, 0.25, 0.6, -0.3, 0.8)};
    cfg.p1 = 0.4;
    cfg.loss_fa = 2.0;
    cfg.loss_md = 3.0;
    const SystemEvaluator eval(cfg);
    const EvalReport a = eval.evaluate();
    const std::vector<double> g = {0.4, -0.3}, p = {0.2, 0.8};
    const EvalReport b = eval.evaluate(g, p);
    CHECK(a.p_fa == b.p_fa);
    CHECK(a.p_md == b.p_md);
    CHECK(a.expected_loss == b.expected_loss);
}
