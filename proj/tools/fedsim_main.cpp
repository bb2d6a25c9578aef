#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/local_solver.hpp"

namespace {

struct SourceOpts {
    std::string config_path;
    std::string preset_name;
};

void add_source_opts(CLI::App* cmd, SourceOpts& opts) {
    cmd->add_option("--config", opts.config_path, "path to a configuration file");
    cmd->add_option("--preset", opts.preset_name, "name of a built-in preset");
}

fedsim::ExperimentConfig load_config(const SourceOpts& opts) {
    if (opts.config_path.empty() == opts.preset_name.empty()) {
        throw fedsim::ConfigError("exactly one of --config or --preset is required");
    }
    if (!opts.config_path.empty()) {
        return fedsim::parse_config(opts.config_path);
    }
    return fedsim::preset(opts.preset_name);
}

int steps_at(const std::vector<int>& steps, int m) {
    return steps[steps.size() == 1 ? 0 : static_cast<std::size_t>(m)];
}

int run_simulate(const SourceOpts& src, const std::string& out_path,
                 const std::optional<std::uint64_t>& seed, const std::optional<int>& replicates,
                 const std::optional<int>& jobs) {
    fedsim::ExperimentConfig config = load_config(src);
    if (seed) {
        config.seed = *seed;
    }
    if (replicates) {
        config.replicates = *replicates;
    }
    if (jobs) {
        config.jobs = *jobs;
    }
    const std::vector<fedsim::AlgorithmRun> runs = fedsim::run_experiment(config);
    fedsim::emit_csv(runs, out_path);
    std::size_t rows = 0;
    for (const fedsim::AlgorithmRun& run : runs) {
        for (const fedsim::ReplicateRun& rep : run.replicates) {
            rows += rep.records.size();
        }
    }
    std::cout << "simulate: " << runs.size() << " algorithms x " << config.replicates
              << " replicates x " << config.rounds << " rounds -> " << rows << " rows in "
              << out_path << "\n";
    return 0;
}

int run_codesign(const SourceOpts& src) {
    const fedsim::ExperimentConfig config = load_config(src);
    const auto* plan = std::get_if<fedsim::CodesignSchedule>(&config.schedule);
    if (plan == nullptr) {
        throw fedsim::ConfigError("analyze codesign needs 'schedule = codesign'");
    }
    const std::vector<double> weights = fedsim::resolved_weights(config);
    const fedsim::SolverSpec& solver = config.algorithms.front().solver;
    std::vector<double> l1(static_cast<std::size_t>(config.clients));
    for (int m = 0; m < config.clients; ++m) {
        l1[static_cast<std::size_t>(m)] =
            fedsim::accumulation_l1(solver, steps_at(plan->local_steps, m), config.eta);
    }
    const fedsim::CodesignResult result =
        fedsim::codesign_complete_q(weights, l1, plan->anchor_q);
    std::cout << std::setprecision(10) << "codesign: eta_eff_factor=" << result.eta_eff_factor
              << " t_eff=" << result.t_eff << " q=";
    for (std::size_t m = 0; m < result.failure_probs.size(); ++m) {
        std::cout << (m ? "," : "") << result.failure_probs[m];
    }
    std::cout << " l1=";
    for (std::size_t m = 0; m < result.l1_norms.size(); ++m) {
        std::cout << (m ? "," : "") << result.l1_norms[m];
    }
    std::cout << "\n";
    return 0;
}

int run_calibrate(const SourceOpts& src) {
    const fedsim::ExperimentConfig config = load_config(src);
    const std::vector<double> weights = fedsim::resolved_weights(config);
    const fedsim::AlgorithmSpec& algo = config.algorithms.front();
    const std::vector<fedsim::ClientProfile> population =
        fedsim::build_population(config, algo, 0);
    std::vector<double> q(static_cast<std::size_t>(config.clients));
    std::vector<double> l1(static_cast<std::size_t>(config.clients));
    for (int m = 0; m < config.clients; ++m) {
        const fedsim::RoundPlan plan = population[static_cast<std::size_t>(m)].schedule(0);
        q[static_cast<std::size_t>(m)] = plan.failure_prob;
        l1[static_cast<std::size_t>(m)] =
            fedsim::accumulation_l1(algo.solver, plan.local_steps, config.eta);
    }
    const fedsim::StepCalibration cal =
        fedsim::calibrate_step_lengths(config.eta, weights, q, l1);
    std::cout << std::setprecision(10) << "calibrate: fedavg=" << cal.fedavg
              << " fedacs=" << cal.fedacs << " ca-fedavg=" << cal.ca_fedavg
              << " fedvarp=" << cal.fedvarp << " fednova=" << cal.fednova
              << " optimal-sampling=" << cal.optimal_sampling
              << " product=" << cal.reference_product << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator for federated averaging over lossy links with uneven local work"};
    app.require_subcommand(1);

    SourceOpts sim_src;
    std::string out_path;
    std::uint64_t seed_value = 0;
    int replicates_value = 0;
    int jobs_value = 0;
    CLI::App* sim = app.add_subcommand(
        "simulate", "run replicated experiments and write per-round metrics as CSV");
    add_source_opts(sim, sim_src);
    sim->add_option("--out", out_path, "output CSV path")->required();
    CLI::Option* seed_opt = sim->add_option("--seed", seed_value, "override the base seed");
    CLI::Option* reps_opt =
        sim->add_option("--replicates", replicates_value, "override the replicate count");
    CLI::Option* jobs_opt =
        sim->add_option("--jobs", jobs_value, "worker threads for replicate-level parallelism");

    CLI::App* analyze =
        app.add_subcommand("analyze", "closed-form diagnostics for a configuration");
    analyze->require_subcommand(1);
    SourceOpts codesign_src;
    CLI::App* codesign = analyze->add_subcommand(
        "codesign", "complete per-client failure probabilities from the step counts");
    add_source_opts(codesign, codesign_src);
    SourceOpts calibrate_src;
    CLI::App* calibrate = analyze->add_subcommand(
        "calibrate", "per-method step lengths matched to a common effective product");
    add_source_opts(calibrate, calibrate_src);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            std::optional<std::uint64_t> seed;
            if (seed_opt->count() > 0) {
                seed = seed_value;
            }
            std::optional<int> replicates;
            if (reps_opt->count() > 0) {
                replicates = replicates_value;
            }
            std::optional<int> jobs;
            if (jobs_opt->count() > 0) {
                jobs = jobs_value;
            }
            return run_simulate(sim_src, out_path, seed, replicates, jobs);
        }
        if (codesign->parsed()) {
            return run_codesign(codesign_src);
        }
        return run_calibrate(calibrate_src);
    } catch (const fedsim::NumericalBlowup& e) {
        std::cerr << "numerical blowup: " << e.what() << "\n";
        return 3;
    } catch (const fedsim::SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
