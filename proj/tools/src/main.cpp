#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cloudcluster/errors.hpp"
#include "experiments.hpp"

namespace cc = cloudcluster;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::int64_t seed = -1;
    std::int64_t trials = -1;
    int threads = 0;
    bool emit_config = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment config; defaults when omitted");
    cmd->add_option("--out", args.out_path, "output path (stdout when omitted)");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--trials", args.trials, "override the config trial count");
    cmd->add_option("--threads", args.threads,
                    "worker threads; 0 uses CLOUDCLUSTER_THREADS, then the hardware count");
    cmd->add_flag("--emit-config", args.emit_config,
                  "print the canonical config actually in effect and exit");
}

cc::ExperimentConfig effective_config(const CommonArgs& args) {
    cc::ExperimentConfig cfg =
        args.config_path.empty() ? cc::default_config() : cc::load_config(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (args.trials >= 0) {
        if (args.trials < 1) throw cc::ConfigError("--trials must be at least 1");
        cfg.trials = static_cast<std::uint64_t>(args.trials);
    }
    cc::validate(cfg);
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"cloud-cluster detection experiments"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* comm_prob = app.add_subcommand(
        "comm-prob", "cluster communication probability over the size grid");
    auto* sweep_pcom = app.add_subcommand(
        "sweep-pcom", "expected-loss curves over the per-sensor communication probability grid");
    auto* sweep_nc =
        app.add_subcommand("sweep-nc", "expected-loss curves over the cluster-count grid");
    auto* optimize = app.add_subcommand(
        "optimize", "threshold optimization report: exact vs surrogate, initialization comparison");
    auto* simulate =
        app.add_subcommand("simulate", "Monte Carlo validation of the optimized system");
    for (auto* cmd : {comm_prob, sweep_pcom, sweep_nc, optimize, simulate})
        add_common(cmd, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const cc::ExperimentConfig cfg = effective_config(args);
    if (args.emit_config) {
        cc::write_output(args.out_path, cc::emit_config(cfg));
        return 0;
    }
    const int threads = cc::resolve_threads(args.threads);

    if (comm_prob->parsed()) {
        cc::write_output(args.out_path, cc::comm_prob_table(cc::run_comm_prob(cfg)).str());
    } else if (sweep_pcom->parsed()) {
        cc::write_output(args.out_path,
                         cc::curve_table(cc::run_sweep_pcom(cfg, threads), cfg.seed).str());
    } else if (sweep_nc->parsed()) {
        cc::write_output(args.out_path,
                         cc::curve_table(cc::run_sweep_nc(cfg, threads), cfg.seed).str());
    } else if (optimize->parsed()) {
        const cc::OptimizeOutcome o = cc::run_optimize(cfg, threads);
        std::fputs(cc::optimize_summary(o, cfg).c_str(), stderr);
        cc::write_output(args.out_path, cc::optimize_table(o, cfg.seed).str());
    } else if (simulate->parsed()) {
        cc::write_output(args.out_path,
                         cc::simulate_table(cc::run_simulate(cfg, threads), cfg.seed).str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const cc::SizeCapError& e) {
        std::fprintf(stderr, "numeric-domain error: %s\n", e.what());
        return 3;
    } catch (const cc::DomainError& e) {
        std::fprintf(stderr, "numeric-domain error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
