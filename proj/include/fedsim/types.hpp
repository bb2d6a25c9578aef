#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

using Vec = Eigen::VectorXd;

/// Local optimizer family run by each client between communication rounds.
enum class SolverKind { PlainSgd, MomentumSgd, ProximalSgd, DecayedSgd };

/// Federated algorithm: the (sampler, aggregator) pairing the server runs.
enum class Method { FedAvg, FedAcs, CaFedAvg, FedVarp, FedNova, OptimalSampling };

std::string method_name(Method method);

/// A solver family plus its single scalar parameter.
struct SolverSpec {
    SolverKind kind = SolverKind::PlainSgd;
    double param = 0.0;

    static SolverSpec plain() { return {SolverKind::PlainSgd, 0.0}; }
    static SolverSpec momentum(double rho);
    static SolverSpec proximal(double mu);
    static SolverSpec decayed(double rate);
};

std::string solver_name(const SolverSpec& spec);

/// Per-step weights the solver applies to the stochastic gradients of one
/// local run: the model update sent upstream is -eta * sum_t a_t * g_t.
struct AccumulationVector {
    std::vector<double> coeffs;
    double l1 = 0.0;

    static AccumulationVector from_coeffs(std::vector<double> coeffs);
    int steps() const { return static_cast<int>(coeffs.size()); }
};

/// What one client does in one round: how many local steps it runs and the
/// probability that its upload is lost.
struct RoundPlan {
    int local_steps = 1;
    double failure_prob = 0.0;
};

/// Pure mapping round -> RoundPlan.  Implementations must return the same
/// plan every time they are called with the same round.
using ScheduleFn = std::function<RoundPlan(std::int64_t)>;

struct ClientProfile {
    int id = 0;
    double weight = 0.0;
    ScheduleFn schedule;
};

/// Validates ids (unique), weights (positive, sum to one), and spot-checks
/// each schedule's round-0 plan.  Throws on the first violation.
void validate_population(const std::vector<ClientProfile>& profiles);

void validate_round_plan(const RoundPlan& plan, int client_id);

/// Multiset of client ids; selections with replacement keep multiplicity.
class ClientMultiset {
public:
    ClientMultiset() = default;

    void add(int id, int count = 1);
    int count(int id) const;
    int total() const { return total_; }
    bool empty() const { return total_ == 0; }
    const std::map<int, int>& counts() const { return counts_; }

    /// True when every id in `other` appears here with at least the same
    /// multiplicity.
    bool contains(const ClientMultiset& other) const;

    bool operator==(const ClientMultiset& other) const { return counts_ == other.counts_; }

private:
    std::map<int, int> counts_;
    int total_ = 0;
};

/// Everything recorded about one communication round.
struct RoundRecord {
    std::int64_t round = 0;
    ClientMultiset selected;
    ClientMultiset delivered;
    Vec update;
    std::map<std::string, double> metrics;
};

/// Weighted surrogate objective induced by a sampling/channel/solver triple:
/// the running model follows sum_m omega_eff[m] * F_m instead of the target
/// mixture, with effective step-size factor eta_eff_factor (multiply by the
/// base step length) and effective local work t_eff.
struct SurrogateStats {
    std::vector<double> gamma;
    std::vector<double> omega_eff;
    double eta_eff_factor = 0.0;
    double t_eff = 0.0;
    double chi_square = 0.0;
};

}  // namespace fedsim
