#pragma once

#include <utility>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Applies independent Bernoulli link failures to every instance of the
/// selected multiset: a client sampled j times draws j independent delivery
/// indicators.  failure_probs[m] is the loss probability of client m's link.
ClientMultiset transmit(const ClientMultiset& selected, const std::vector<double>& failure_probs,
                        RandomStream& rng);

/// Constant schedule: every round runs `local_steps` steps over a link with
/// failure probability `failure_prob`.
ScheduleFn schedule_static(int local_steps, double failure_prob);

struct IntRange {
    int lo = 1;
    int hi = 1;
};
struct RealRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Per-client schedules with steps ~ U{steps.lo..steps.hi} and failure
/// probability ~ U[q.lo, q.hi].  With per_round=false each client draws once
/// (static heterogeneity keyed by (seed, client)); with per_round=true every
/// round redraws, keyed by (seed, client, round).
std::vector<ScheduleFn> schedule_uniform_random(int clients, IntRange steps, RealRange q,
                                                bool per_round, std::uint64_t seed);

/// Two-population dynamic schedule: clients [0, group_split) draw per round
/// from `fast`, the rest from `slow`.
struct GroupRanges {
    IntRange steps;
    RealRange q;
};
std::vector<ScheduleFn> schedule_two_group(int clients, int group_split, const GroupRanges& fast,
                                           const GroupRanges& slow, std::uint64_t seed);

}  // namespace fedsim
