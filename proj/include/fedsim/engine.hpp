#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/analysis.hpp"
#include "fedsim/channel.hpp"
#include "fedsim/quadratic.hpp"
#include "fedsim/sampling.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

struct AlgorithmSpec {
    std::string label;
    Method method = Method::FedAvg;
    SolverSpec solver = SolverSpec::plain();
};

/// Fixed per-client plans; vectors of size 1 broadcast to every client.
struct StaticSchedule {
    std::vector<int> local_steps{1};
    std::vector<double> failure_probs{0.0};
};

/// Per-client draws from uniform ranges, either once (static heterogeneity)
/// or every round.
struct UniformSchedule {
    IntRange steps;
    RealRange q;
    bool per_round = false;
};

/// Two client groups with separate per-round ranges.
struct TwoGroupSchedule {
    int group_split = 0;
    GroupRanges fast;
    GroupRanges slow;
};

/// Fixed step counts with failure probabilities completed from the anchor
/// client-0 probability so that (1-q_m) * l1_m is constant.
struct CodesignSchedule {
    std::vector<int> local_steps{1};
    double anchor_q = 0.0;
};

using SchedulePolicy =
    std::variant<StaticSchedule, UniformSchedule, TwoGroupSchedule, CodesignSchedule>;

/// Client objective anchors: standard Gaussian draws keyed by (seed, client),
/// or an explicit list.
struct AnchorPolicy {
    bool gaussian = true;
    std::vector<Vec> explicit_anchors;
};

struct ExperimentConfig {
    int clients = 2;
    int dim = 1;
    std::int64_t rounds = 1000;
    int replicates = 1;
    int sample_count = 1;
    double eta = 1e-3;
    double sigma_sq = 0.0;
    std::uint64_t seed = 1;
    bool calibrate = true;
    std::int64_t record_every = 1;
    double blowup_guard = 1e12;
    int jobs = 1;
    std::vector<double> weights;
    SchedulePolicy schedule = StaticSchedule{};
    AnchorPolicy anchors;
    std::vector<AlgorithmSpec> algorithms;
};

void validate_config(const ExperimentConfig& config);

/// Client weights with the uniform default applied.
std::vector<double> resolved_weights(const ExperimentConfig& config);

QuadraticProblem build_problem(const ExperimentConfig& config);

/// Instantiates client profiles with schedules bound to concrete streams.
/// The replicate index only affects per-round redraws; static heterogeneity
/// is shared by all replicates and algorithms.  Completed co-design
/// probabilities depend on the algorithm's solver through its accumulation
/// masses.
std::vector<ClientProfile> build_population(const ExperimentConfig& config,
                                            const AlgorithmSpec& algo, int replicate);

/// Mutable simulation state threaded through rounds of one replicate.
struct EngineState {
    Vec model;
    VarpMemory varp;

    EngineState(Vec start, int clients) : model(std::move(start)), varp(clients) {}
};

/// Read-only context shared by every round of one (algorithm, replicate) run.
/// For static schedules the per-round plan quantities are precomputed once;
/// prepare_round_context fills them.
struct RoundContext {
    const ExperimentConfig* config = nullptr;
    const QuadraticProblem* problem = nullptr;
    const std::vector<ClientProfile>* population = nullptr;
    const std::vector<double>* weights = nullptr;
    const AlgorithmSpec* algo = nullptr;
    Vec true_opt;
    std::uint64_t run_seed = 0;

    bool static_plans = false;
    std::vector<int> cached_steps;
    std::vector<double> cached_q;
    std::vector<double> cached_l1;
    double cached_eta = 0.0;
    double cached_tau = 0.0;
    /// Sampling distribution, precomputed when the plans are static and the
    /// method's probabilities do not depend on the current model.
    bool probs_cached = false;
    ProbabilityVector cached_probs;
};

/// Builds the context for one (algorithm, replicate) run, precomputing plan
/// quantities when the schedule policy is round-invariant.
RoundContext prepare_round_context(const ExperimentConfig& config,
                                   const QuadraticProblem& problem,
                                   const std::vector<ClientProfile>& population,
                                   const std::vector<double>& weights, const AlgorithmSpec& algo,
                                   int algo_index, int replicate);

/// The surrogate statistics an algorithm actually induces in one round,
/// accounting for its aggregation rule: inverse-probability weighting
/// cancels the delivery skew, normalized averaging cancels the computation
/// skew, anonymous averaging keeps both.
SurrogateStats round_stats_for_method(Method method, const std::vector<double>& p,
                                      const std::vector<double>& failure_probs,
                                      const std::vector<double>& l1_norms,
                                      const std::vector<double>& weights);

/// Executes one round: sample -> local runs -> transmit -> aggregate ->
/// metrics.  When `record` is non-null it is filled with the selection,
/// delivery, update, and the metrics dist_true, dist_surrogate,
/// grad_norm_sq (true objective), chi_square, eta_eff, t_eff.  Passing
/// nullptr skips all of that bookkeeping; the recording choice never
/// touches the random streams, so the trajectory is unchanged.
void run_round(EngineState& state, const RoundContext& ctx, std::int64_t round,
               RoundRecord* record);

struct ReplicateRun {
    int replicate = 0;
    std::vector<RoundRecord> records;
    Vec final_model;
};

struct AlgorithmRun {
    AlgorithmSpec algo;
    std::vector<ReplicateRun> replicates;
};

/// Runs every configured algorithm for the configured number of replicates.
/// Replicates run in parallel when config.jobs > 1; results are identical to
/// the sequential order because every stream is keyed, not shared.
std::vector<AlgorithmRun> run_experiment(const ExperimentConfig& config);

}  // namespace fedsim
