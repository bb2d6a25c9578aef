#include "fedsim/channel.hpp"

#include <sstream>

namespace fedsim {

namespace {

void check_ranges(const IntRange& steps, const RealRange& q) {
    if (steps.lo < 1 || steps.hi < steps.lo) {
        std::ostringstream msg;
        msg << "invalid local step range [" << steps.lo << ", " << steps.hi << "]";
        throw BadSchedule(msg.str());
    }
    if (!(q.lo >= 0.0 && q.hi >= q.lo && q.hi < 1.0)) {
        std::ostringstream msg;
        msg << "invalid failure probability range [" << q.lo << ", " << q.hi << "]";
        throw BadSchedule(msg.str());
    }
}

RoundPlan draw_plan(const IntRange& steps, const RealRange& q, RandomStream& stream) {
    RoundPlan plan;
    plan.local_steps = stream.uniform_int(steps.lo, steps.hi);
    plan.failure_prob = q.lo == q.hi ? q.lo : stream.uniform(q.lo, q.hi);
    return plan;
}

}  // namespace

ClientMultiset transmit(const ClientMultiset& selected, const std::vector<double>& failure_probs,
                        RandomStream& rng) {
    ClientMultiset delivered;
    for (const auto& [id, n] : selected.counts()) {
        if (id < 0 || id >= static_cast<int>(failure_probs.size())) {
            throw WrongShape("selected client id " + std::to_string(id) +
                             " outside failure probability vector");
        }
        const double q = failure_probs[static_cast<std::size_t>(id)];
        if (!(q >= 0.0 && q < 1.0)) {
            throw BadSchedule("failure probability must lie in [0, 1), got " + std::to_string(q));
        }
        int kept = 0;
        for (int i = 0; i < n; ++i) {
            if (rng.uniform() >= q) {
                ++kept;
            }
        }
        if (kept > 0) {
            delivered.add(id, kept);
        }
    }
    return delivered;
}

ScheduleFn schedule_static(int local_steps, double failure_prob) {
    const RoundPlan plan{local_steps, failure_prob};
    validate_round_plan(plan, -1);
    return [plan](std::int64_t) { return plan; };
}

std::vector<ScheduleFn> schedule_uniform_random(int clients, IntRange steps, RealRange q,
                                                bool per_round, std::uint64_t seed) {
    if (clients < 1) {
        throw WrongShape("client count must be >= 1");
    }
    check_ranges(steps, q);
    std::vector<ScheduleFn> out;
    out.reserve(static_cast<std::size_t>(clients));
    for (int m = 0; m < clients; ++m) {
        const auto client = static_cast<std::uint64_t>(m);
        if (per_round) {
            out.push_back([steps, q, seed, client](std::int64_t round) {
                auto stream = RandomStream::from_key(
                    {seed, kStreamSchedule, client, static_cast<std::uint64_t>(round)});
                return draw_plan(steps, q, stream);
            });
        } else {
            auto stream = RandomStream::from_key({seed, kStreamSchedule, client});
            const RoundPlan plan = draw_plan(steps, q, stream);
            out.push_back([plan](std::int64_t) { return plan; });
        }
    }
    return out;
}

std::vector<ScheduleFn> schedule_two_group(int clients, int group_split, const GroupRanges& fast,
                                           const GroupRanges& slow, std::uint64_t seed) {
    if (clients < 1 || group_split < 0 || group_split > clients) {
        throw BadSchedule("group split must partition the client range");
    }
    check_ranges(fast.steps, fast.q);
    check_ranges(slow.steps, slow.q);
    std::vector<ScheduleFn> out;
    out.reserve(static_cast<std::size_t>(clients));
    for (int m = 0; m < clients; ++m) {
        const GroupRanges& group = m < group_split ? fast : slow;
        const auto client = static_cast<std::uint64_t>(m);
        out.push_back([group, seed, client](std::int64_t round) {
            auto stream = RandomStream::from_key(
                {seed, kStreamSchedule, client, static_cast<std::uint64_t>(round)});
            return draw_plan(group.steps, group.q, stream);
        });
    }
    return out;
}

}  // namespace fedsim
