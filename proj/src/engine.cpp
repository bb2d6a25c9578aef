#include "fedsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fedsim/local_solver.hpp"
#include "fedsim/sampling.hpp"

namespace fedsim {

namespace {

void check_broadcastable(std::size_t size, int clients, const char* what) {
    if (size != 1 && size != static_cast<std::size_t>(clients)) {
        std::ostringstream msg;
        msg << what << " must have 1 or " << clients << " entries, got " << size;
        throw ValidationError(msg.str());
    }
}

template <typename T>
T broadcast_at(const std::vector<T>& values, int m) {
    return values.size() == 1 ? values.front() : values[static_cast<std::size_t>(m)];
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
    if (config.clients < 1) {
        throw ValidationError("clients must be >= 1");
    }
    if (config.dim < 1) {
        throw ValidationError("dim must be >= 1");
    }
    if (config.rounds < 1) {
        throw ValidationError("rounds must be >= 1");
    }
    if (config.replicates < 1) {
        throw ValidationError("replicates must be >= 1");
    }
    if (config.sample_count < 1) {
        throw ValidationError("sample_count must be >= 1");
    }
    if (!(config.eta > 0.0)) {
        throw ValidationError("eta must be positive");
    }
    if (!(config.sigma_sq >= 0.0)) {
        throw ValidationError("sigma_sq must be nonnegative");
    }
    if (config.record_every < 1) {
        throw ValidationError("record_every must be >= 1");
    }
    if (!(config.blowup_guard > 0.0)) {
        throw ValidationError("blowup_guard must be positive");
    }
    if (config.jobs < 1) {
        throw ValidationError("jobs must be >= 1");
    }
    if (!config.weights.empty()) {
        if (static_cast<int>(config.weights.size()) != config.clients) {
            throw ValidationError("weights must list one entry per client");
        }
        double sum = 0.0;
        for (double w : config.weights) {
            if (!(w > 0.0 && w <= 1.0)) {
                throw ValidationError("weights must lie in (0, 1]");
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-10) {
            throw ValidationError("weights must sum to 1 within 1e-10");
        }
    }
    if (config.algorithms.empty()) {
        throw ValidationError("at least one algorithm section is required");
    }
    std::set<std::string> labels;
    for (const auto& algo : config.algorithms) {
        if (algo.label.empty()) {
            throw ValidationError("algorithm labels must be nonempty");
        }
        if (!labels.insert(algo.label).second) {
            throw ValidationError("duplicate algorithm label: " + algo.label);
        }
    }
    if (const auto* s = std::get_if<StaticSchedule>(&config.schedule)) {
        check_broadcastable(s->local_steps.size(), config.clients, "local_steps");
        check_broadcastable(s->failure_probs.size(), config.clients, "failure_probs");
        for (int m = 0; m < config.clients; ++m) {
            validate_round_plan(
                {broadcast_at(s->local_steps, m), broadcast_at(s->failure_probs, m)}, m);
        }
    } else if (const auto* c = std::get_if<CodesignSchedule>(&config.schedule)) {
        check_broadcastable(c->local_steps.size(), config.clients, "local_steps");
        for (int m = 0; m < config.clients; ++m) {
            validate_round_plan({broadcast_at(c->local_steps, m), c->anchor_q}, m);
        }
    } else if (const auto* t = std::get_if<TwoGroupSchedule>(&config.schedule)) {
        if (t->group_split < 0 || t->group_split > config.clients) {
            throw ValidationError("group_split must lie in [0, clients]");
        }
    }
    if (!config.anchors.gaussian) {
        if (static_cast<int>(config.anchors.explicit_anchors.size()) != config.clients) {
            throw ValidationError("explicit anchors must list one vector per client");
        }
        for (const Vec& e : config.anchors.explicit_anchors) {
            if (e.size() != config.dim) {
                throw ValidationError("anchor dimension must match dim");
            }
        }
    }
}

std::vector<double> resolved_weights(const ExperimentConfig& config) {
    if (!config.weights.empty()) {
        return config.weights;
    }
    return std::vector<double>(static_cast<std::size_t>(config.clients), 1.0 / config.clients);
}

QuadraticProblem build_problem(const ExperimentConfig& config) {
    QuadraticProblem problem;
    problem.sigma_sq = config.sigma_sq;
    problem.anchors.reserve(static_cast<std::size_t>(config.clients));
    if (config.anchors.gaussian) {
        for (int m = 0; m < config.clients; ++m) {
            auto stream = RandomStream::from_key(
                {config.seed, kStreamAnchor, static_cast<std::uint64_t>(m)});
            Vec e(config.dim);
            for (int i = 0; i < config.dim; ++i) {
                e[i] = stream.gaussian();
            }
            problem.anchors.push_back(std::move(e));
        }
    } else {
        problem.anchors = config.anchors.explicit_anchors;
    }
    problem.validate();
    return problem;
}

std::vector<ClientProfile> build_population(const ExperimentConfig& config,
                                            const AlgorithmSpec& algo, int replicate) {
    const std::vector<double> weights = resolved_weights(config);
    std::vector<ScheduleFn> schedules;

    if (const auto* s = std::get_if<StaticSchedule>(&config.schedule)) {
        for (int m = 0; m < config.clients; ++m) {
            schedules.push_back(schedule_static(broadcast_at(s->local_steps, m),
                                                broadcast_at(s->failure_probs, m)));
        }
    } else if (const auto* c = std::get_if<CodesignSchedule>(&config.schedule)) {
        std::vector<double> l1(static_cast<std::size_t>(config.clients));
        std::vector<int> steps(static_cast<std::size_t>(config.clients));
        for (int m = 0; m < config.clients; ++m) {
            steps[static_cast<std::size_t>(m)] = broadcast_at(c->local_steps, m);
            l1[static_cast<std::size_t>(m)] =
                accumulation_vector(algo.solver, steps[static_cast<std::size_t>(m)], config.eta)
                    .l1;
        }
        const CodesignResult design = codesign_complete_q(weights, l1, c->anchor_q);
        for (int m = 0; m < config.clients; ++m) {
            schedules.push_back(schedule_static(steps[static_cast<std::size_t>(m)],
                                                design.failure_probs[static_cast<std::size_t>(m)]));
        }
    } else if (const auto* u = std::get_if<UniformSchedule>(&config.schedule)) {
        const std::uint64_t seed =
            u->per_round
                ? mix_key({config.seed, kStreamReplicate, static_cast<std::uint64_t>(replicate)})
                : config.seed;
        schedules = schedule_uniform_random(config.clients, u->steps, u->q, u->per_round, seed);
    } else if (const auto* t = std::get_if<TwoGroupSchedule>(&config.schedule)) {
        const std::uint64_t seed =
            mix_key({config.seed, kStreamReplicate, static_cast<std::uint64_t>(replicate)});
        schedules = schedule_two_group(config.clients, t->group_split, t->fast, t->slow, seed);
    }

    std::vector<ClientProfile> out;
    out.reserve(static_cast<std::size_t>(config.clients));
    for (int m = 0; m < config.clients; ++m) {
        out.push_back({m, weights[static_cast<std::size_t>(m)],
                       std::move(schedules[static_cast<std::size_t>(m)])});
    }
    validate_population(out);
    return out;
}

SurrogateStats round_stats_for_method(Method method, const std::vector<double>& p,
                                      const std::vector<double>& failure_probs,
                                      const std::vector<double>& l1_norms,
                                      const std::vector<double>& weights) {
    switch (method) {
        case Method::FedAvg:
        case Method::FedAcs:
        case Method::OptimalSampling:
            return surrogate_stats(p, failure_probs, l1_norms, weights);
        case Method::CaFedAvg:
        case Method::FedVarp: {
            // Inverse-probability weighting cancels (1-q), so the delivered
            // mass per client is just p_m and the step factor is 1.
            SurrogateStats out;
            out.gamma = p;
            out.eta_eff_factor = 1.0;
            double t_eff = 0.0;
            for (std::size_t m = 0; m < p.size(); ++m) {
                t_eff += p[m] * l1_norms[m];
            }
            out.t_eff = t_eff;
            out.omega_eff.resize(p.size());
            double chi = 0.0;
            for (std::size_t m = 0; m < p.size(); ++m) {
                out.omega_eff[m] = p[m] * l1_norms[m] / t_eff;
                const double diff = weights[m] - out.omega_eff[m];
                chi += diff * diff / out.omega_eff[m];
            }
            out.chi_square = chi;
            return out;
        }
        case Method::FedNova: {
            // Update normalization removes the computation skew, leaving the
            // delivery skew: the surrogate weights collapse to gamma.
            const SurrogateStats base = surrogate_stats(p, failure_probs, l1_norms, weights);
            SurrogateStats out;
            out.gamma = base.gamma;
            out.eta_eff_factor = base.eta_eff_factor;
            out.t_eff = base.t_eff;
            out.omega_eff = base.gamma;
            double chi = 0.0;
            for (std::size_t m = 0; m < weights.size(); ++m) {
                const double diff = weights[m] - out.omega_eff[m];
                chi += diff * diff / out.omega_eff[m];
            }
            out.chi_square = chi;
            return out;
        }
    }
    throw WrongShape("unknown method");
}

void run_round(EngineState& state, const RoundContext& ctx, std::int64_t round,
               RoundRecord* record) {
    const ExperimentConfig& config = *ctx.config;
    const QuadraticProblem& problem = *ctx.problem;
    const std::vector<ClientProfile>& population = *ctx.population;
    const std::vector<double>& weights = *ctx.weights;
    const Method method = ctx.algo->method;
    const int clients = static_cast<int>(population.size());

    std::vector<int> fresh_steps;
    std::vector<double> fresh_q;
    std::vector<double> fresh_l1;
    double eta_algo = ctx.cached_eta;
    if (!ctx.static_plans) {
        fresh_steps.resize(static_cast<std::size_t>(clients));
        fresh_q.resize(static_cast<std::size_t>(clients));
        fresh_l1.resize(static_cast<std::size_t>(clients));
        for (int m = 0; m < clients; ++m) {
            const RoundPlan plan = population[static_cast<std::size_t>(m)].schedule(round);
            validate_round_plan(plan, m);
            fresh_steps[static_cast<std::size_t>(m)] = plan.local_steps;
            fresh_q[static_cast<std::size_t>(m)] = plan.failure_prob;
            fresh_l1[static_cast<std::size_t>(m)] =
                accumulation_l1(ctx.algo->solver, plan.local_steps, config.eta);
        }
        eta_algo = config.calibrate
                       ? calibrate_step_lengths(config.eta, weights, fresh_q, fresh_l1)
                             .for_method(method)
                       : config.eta;
    }
    const std::vector<int>& steps = ctx.static_plans ? ctx.cached_steps : fresh_steps;
    const std::vector<double>& q = ctx.static_plans ? ctx.cached_q : fresh_q;
    const std::vector<double>& l1 = ctx.static_plans ? ctx.cached_l1 : fresh_l1;

    ProbabilityVector fresh_probs;
    if (!ctx.probs_cached) {
        switch (method) {
            case Method::FedAcs:
                fresh_probs = probs_fedacs(weights, q, l1);
                break;
            case Method::OptimalSampling: {
                std::vector<double> norms(static_cast<std::size_t>(clients));
                Vec scratch;
                for (int m = 0; m < clients; ++m) {
                    problem.grad_into(m, state.model, scratch);
                    norms[static_cast<std::size_t>(m)] = scratch.norm();
                }
                fresh_probs = probs_optimal_sampling(weights, norms);
                break;
            }
            default:
                fresh_probs = probs_importance(weights);
                break;
        }
    }
    const ProbabilityVector& probs = ctx.probs_cached ? ctx.cached_probs : fresh_probs;

    const auto r = static_cast<std::uint64_t>(round);
    auto sampling_stream = RandomStream::from_key({ctx.run_seed, kStreamSampling, r});
    const ClientMultiset selected = draw_multiset(probs, config.sample_count, sampling_stream);

    // One local run per distinct selected client; a client sampled j times
    // contributes the same realization j times.
    std::map<int, Vec> deltas;
    const NoiseSpec noise{config.sigma_sq};
    for (const auto& [m, n] : selected.counts()) {
        auto local_stream =
            RandomStream::from_key({ctx.run_seed, kStreamLocal, r, static_cast<std::uint64_t>(m)});
        const GradientFn grad = [&problem, m](const Vec& x, int, Vec& out) {
            problem.grad_into(m, x, out);
        };
        Vec delta;
        run_local_delta(state.model, grad, ctx.algo->solver, steps[static_cast<std::size_t>(m)],
                        eta_algo, noise, local_stream, config.blowup_guard, delta);
        deltas.emplace(m, std::move(delta));
    }

    auto channel_stream = RandomStream::from_key({ctx.run_seed, kStreamChannel, r});
    const ClientMultiset delivered = transmit(selected, q, channel_stream);

    Vec next;
    switch (method) {
        case Method::FedAvg:
        case Method::FedAcs:
        case Method::OptimalSampling:
            next = aggregate_anonymous(state.model, delivered, deltas, config.sample_count,
                                       eta_algo);
            break;
        case Method::CaFedAvg:
            next = aggregate_ca_fedavg(state.model, delivered, deltas, q, config.sample_count,
                                       eta_algo);
            break;
        case Method::FedVarp:
            next = aggregate_fedvarp(state.model, selected, delivered, deltas, state.varp, round,
                                     config.sample_count, eta_algo);
            break;
        case Method::FedNova: {
            const double tau_eff = ctx.static_plans
                                       ? ctx.cached_tau
                                       : surrogate_stats(weights, q, l1, weights).t_eff;
            next = aggregate_fednova(state.model, delivered, deltas, l1, tau_eff,
                                     config.sample_count, eta_algo);
            break;
        }
    }

    const double norm = next.norm();
    if (!std::isfinite(norm) || norm > config.blowup_guard) {
        std::ostringstream msg;
        msg << "model norm " << norm << " exceeded guard " << config.blowup_guard << " at round "
            << round;
        throw NumericalBlowup(msg.str());
    }

    if (record != nullptr) {
        record->round = round;
        record->selected = selected;
        record->delivered = delivered;
        record->update = next - state.model;
        const SurrogateStats stats = round_stats_for_method(method, probs.p, q, l1, weights);
        const Vec surrogate_opt = surrogate_optimum_quadratic(problem.anchors, stats.omega_eff);
        record->metrics["dist_true"] = (next - ctx.true_opt).norm();
        record->metrics["dist_surrogate"] = (next - surrogate_opt).norm();
        record->metrics["grad_norm_sq"] = problem.global_grad(next, weights).squaredNorm();
        record->metrics["chi_square"] = stats.chi_square;
        record->metrics["eta_eff"] = eta_algo * stats.eta_eff_factor;
        record->metrics["t_eff"] = stats.t_eff;
    }

    state.model = std::move(next);
}

RoundContext prepare_round_context(const ExperimentConfig& config,
                                   const QuadraticProblem& problem,
                                   const std::vector<ClientProfile>& population,
                                   const std::vector<double>& weights, const AlgorithmSpec& algo,
                                   int algo_index, int replicate) {
    RoundContext ctx;
    ctx.config = &config;
    ctx.problem = &problem;
    ctx.population = &population;
    ctx.weights = &weights;
    ctx.algo = &algo;
    ctx.true_opt = problem.true_optimum(weights);
    ctx.run_seed = mix_key({config.seed, kStreamAlgorithm, static_cast<std::uint64_t>(algo_index),
                            kStreamReplicate, static_cast<std::uint64_t>(replicate)});

    const bool static_policy = std::holds_alternative<StaticSchedule>(config.schedule) ||
                               std::holds_alternative<CodesignSchedule>(config.schedule) ||
                               (std::holds_alternative<UniformSchedule>(config.schedule) &&
                                !std::get<UniformSchedule>(config.schedule).per_round);
    if (static_policy) {
        const int clients = static_cast<int>(population.size());
        ctx.cached_steps.resize(static_cast<std::size_t>(clients));
        ctx.cached_q.resize(static_cast<std::size_t>(clients));
        ctx.cached_l1.resize(static_cast<std::size_t>(clients));
        for (int m = 0; m < clients; ++m) {
            const RoundPlan plan = population[static_cast<std::size_t>(m)].schedule(0);
            validate_round_plan(plan, m);
            ctx.cached_steps[static_cast<std::size_t>(m)] = plan.local_steps;
            ctx.cached_q[static_cast<std::size_t>(m)] = plan.failure_prob;
            ctx.cached_l1[static_cast<std::size_t>(m)] =
                accumulation_l1(algo.solver, plan.local_steps, config.eta);
        }
        ctx.cached_eta =
            config.calibrate
                ? calibrate_step_lengths(config.eta, weights, ctx.cached_q, ctx.cached_l1)
                      .for_method(algo.method)
                : config.eta;
        ctx.cached_tau =
            surrogate_stats(weights, ctx.cached_q, ctx.cached_l1, weights).t_eff;
        ctx.static_plans = true;
        if (algo.method != Method::OptimalSampling) {
            ctx.cached_probs = algo.method == Method::FedAcs
                                   ? probs_fedacs(weights, ctx.cached_q, ctx.cached_l1)
                                   : probs_importance(weights);
            ctx.probs_cached = true;
        }
    }
    return ctx;
}

namespace {

ReplicateRun run_replicate(const ExperimentConfig& config, const QuadraticProblem& problem,
                           const std::vector<double>& weights, const AlgorithmSpec& algo,
                           int algo_index, int replicate) {
    const std::vector<ClientProfile> population = build_population(config, algo, replicate);
    const RoundContext ctx =
        prepare_round_context(config, problem, population, weights, algo, algo_index, replicate);

    EngineState state(Vec::Zero(config.dim), config.clients);
    ReplicateRun out;
    out.replicate = replicate;
    for (std::int64_t round = 0; round < config.rounds; ++round) {
        const bool record_this = round % config.record_every == 0 || round == config.rounds - 1;
        if (record_this) {
            RoundRecord record;
            run_round(state, ctx, round, &record);
            out.records.push_back(std::move(record));
        } else {
            run_round(state, ctx, round, nullptr);
        }
    }
    out.final_model = state.model;
    return out;
}

}  // namespace

std::vector<AlgorithmRun> run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const QuadraticProblem problem = build_problem(config);
    const std::vector<double> weights = resolved_weights(config);

    std::vector<AlgorithmRun> out;
    out.reserve(config.algorithms.size());
    for (std::size_t ai = 0; ai < config.algorithms.size(); ++ai) {
        const AlgorithmSpec& algo = config.algorithms[ai];
        AlgorithmRun run;
        run.algo = algo;
        run.replicates.resize(static_cast<std::size_t>(config.replicates));
        if (config.jobs <= 1 || config.replicates == 1) {
            for (int rep = 0; rep < config.replicates; ++rep) {
                run.replicates[static_cast<std::size_t>(rep)] =
                    run_replicate(config, problem, weights, algo, static_cast<int>(ai), rep);
            }
        } else {
            std::atomic<int> next_rep{0};
            std::atomic<bool> failed{false};
            std::mutex error_mutex;
            std::exception_ptr first_error;
            const int worker_count = std::min(config.jobs, config.replicates);
            std::vector<std::thread> workers;
            workers.reserve(static_cast<std::size_t>(worker_count));
            for (int w = 0; w < worker_count; ++w) {
                workers.emplace_back([&] {
                    while (!failed.load()) {
                        const int rep = next_rep.fetch_add(1);
                        if (rep >= config.replicates) {
                            break;
                        }
                        try {
                            run.replicates[static_cast<std::size_t>(rep)] = run_replicate(
                                config, problem, weights, algo, static_cast<int>(ai), rep);
                        } catch (...) {
                            const std::lock_guard<std::mutex> lock(error_mutex);
                            if (!first_error) {
                                first_error = std::current_exception();
                            }
                            failed.store(true);
                        }
                    }
                });
            }
            for (auto& worker : workers) {
                worker.join();
            }
            if (first_error) {
                std::rethrow_exception(first_error);
            }
        }
        out.push_back(std::move(run));
    }
    return out;
}

}  // namespace fedsim
