#include "fedsim/types.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace fedsim {

SolverSpec SolverSpec::momentum(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw ValidationError("momentum factor must lie in [0, 1), got " + std::to_string(rho));
    }
    return {SolverKind::MomentumSgd, rho};
}

SolverSpec SolverSpec::proximal(double mu) {
    if (!(mu >= 0.0)) {
        throw ValidationError("proximal strength must be nonnegative, got " + std::to_string(mu));
    }
    return {SolverKind::ProximalSgd, mu};
}

SolverSpec SolverSpec::decayed(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ValidationError("decay rate must lie in [0, 1), got " + std::to_string(rate));
    }
    return {SolverKind::DecayedSgd, rate};
}

std::string method_name(Method method) {
    switch (method) {
        case Method::FedAvg:
            return "fedavg";
        case Method::FedAcs:
            return "fedacs";
        case Method::CaFedAvg:
            return "ca-fedavg";
        case Method::FedVarp:
            return "fedvarp";
        case Method::FedNova:
            return "fednova";
        case Method::OptimalSampling:
            return "optimal-sampling";
    }
    return "unknown";
}

std::string solver_name(const SolverSpec& spec) {
    switch (spec.kind) {
        case SolverKind::PlainSgd:
            return "sgd";
        case SolverKind::MomentumSgd:
            return "momentum";
        case SolverKind::ProximalSgd:
            return "proximal";
        case SolverKind::DecayedSgd:
            return "decayed";
    }
    return "unknown";
}

AccumulationVector AccumulationVector::from_coeffs(std::vector<double> coeffs) {
    if (coeffs.empty()) {
        throw WrongShape("accumulation vector must have at least one entry");
    }
    double sum = 0.0;
    for (double c : coeffs) {
        if (!std::isfinite(c) || c < 0.0) {
            throw WrongShape("accumulation coefficients must be finite and nonnegative");
        }
        sum += c;
    }
    if (!(sum > 0.0)) {
        throw WrongShape("accumulation vector must have positive total mass");
    }
    AccumulationVector out;
    out.coeffs = std::move(coeffs);
    out.l1 = sum;
    return out;
}

void validate_round_plan(const RoundPlan& plan, int client_id) {
    if (plan.local_steps < 1) {
        std::ostringstream msg;
        msg << "client " << client_id << ": local step count must be >= 1, got " << plan.local_steps;
        throw BadSchedule(msg.str());
    }
    if (!(plan.failure_prob >= 0.0 && plan.failure_prob < 1.0)) {
        std::ostringstream msg;
        msg << "client " << client_id << ": failure probability must lie in [0, 1), got "
            << plan.failure_prob;
        throw BadSchedule(msg.str());
    }
}

void validate_population(const std::vector<ClientProfile>& profiles) {
    if (profiles.empty()) {
        throw ValidationError("population must contain at least one client");
    }
    std::set<int> ids;
    double weight_sum = 0.0;
    for (const auto& profile : profiles) {
        if (!ids.insert(profile.id).second) {
            throw DuplicateId("duplicate client id " + std::to_string(profile.id));
        }
        if (!(profile.weight > 0.0 && profile.weight <= 1.0)) {
            std::ostringstream msg;
            msg << "client " << profile.id << ": weight must lie in (0, 1], got " << profile.weight;
            throw WeightSumError(msg.str());
        }
        weight_sum += profile.weight;
        if (!profile.schedule) {
            throw BadSchedule("client " + std::to_string(profile.id) + ": missing schedule");
        }
        validate_round_plan(profile.schedule(0), profile.id);
    }
    if (std::abs(weight_sum - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << "client weights must sum to 1 within 1e-10, got " << weight_sum;
        throw WeightSumError(msg.str());
    }
}

void ClientMultiset::add(int id, int count) {
    if (count <= 0) {
        throw WrongShape("multiset counts must be positive");
    }
    counts_[id] += count;
    total_ += count;
}

int ClientMultiset::count(int id) const {
    auto it = counts_.find(id);
    return it == counts_.end() ? 0 : it->second;
}

bool ClientMultiset::contains(const ClientMultiset& other) const {
    for (const auto& [id, n] : other.counts()) {
        if (count(id) < n) {
            return false;
        }
    }
    return true;
}

}  // namespace fedsim
