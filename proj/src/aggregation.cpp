#include "fedsim/aggregation.hpp"

#include <sstream>

namespace fedsim {

namespace {

void check_sample_count(int sample_count, double eta) {
    if (sample_count < 1) {
        throw WrongShape("sample count must be >= 1");
    }
    if (!(eta > 0.0)) {
        throw WrongShape("server step length must be positive");
    }
}

const Vec& delta_for(const std::map<int, Vec>& deltas, int id) {
    auto it = deltas.find(id);
    if (it == deltas.end()) {
        throw WrongShape("missing update for delivered client " + std::to_string(id));
    }
    return it->second;
}

}  // namespace

Vec aggregate_anonymous(const Vec& model, const ClientMultiset& delivered,
                        const std::map<int, Vec>& deltas, int sample_count, double eta) {
    check_sample_count(sample_count, eta);
    Vec sum = Vec::Zero(model.size());
    for (const auto& [id, n] : delivered.counts()) {
        sum += static_cast<double>(n) * delta_for(deltas, id);
    }
    return model - (eta / sample_count) * sum;
}

Vec aggregate_ca_fedavg(const Vec& model, const ClientMultiset& delivered,
                        const std::map<int, Vec>& deltas,
                        const std::vector<double>& failure_probs, int sample_count, double eta) {
    check_sample_count(sample_count, eta);
    Vec sum = Vec::Zero(model.size());
    for (const auto& [id, n] : delivered.counts()) {
        if (id < 0 || id >= static_cast<int>(failure_probs.size())) {
            throw WrongShape("delivered client id outside failure probability vector");
        }
        const double q = failure_probs[static_cast<std::size_t>(id)];
        if (q >= 1.0 - 1e-9) {
            std::ostringstream msg;
            msg << "client " << id << ": failure probability " << q
                << " too close to 1 for inverse-probability weighting";
            throw DegenerateLink(msg.str());
        }
        sum += (static_cast<double>(n) / (1.0 - q)) * delta_for(deltas, id);
    }
    return model - (eta / sample_count) * sum;
}

Vec aggregate_fedvarp(const Vec& model, const ClientMultiset& selected,
                      const ClientMultiset& delivered, const std::map<int, Vec>& deltas,
                      VarpMemory& memory, std::int64_t round, int sample_count, double eta) {
    check_sample_count(sample_count, eta);
    if (!selected.contains(delivered)) {
        throw WrongShape("delivered multiset must be contained in selected multiset");
    }
    Vec sum = Vec::Zero(model.size());
    for (const auto& [id, n] : selected.counts()) {
        if (id < 0 || id >= memory.clients()) {
            throw WrongShape("selected client id outside memory range");
        }
        const auto slot = static_cast<std::size_t>(id);
        const int fresh = delivered.count(id);
        const int stale = n - fresh;
        if (fresh > 0) {
            sum += static_cast<double>(fresh) * delta_for(deltas, id);
        }
        if (stale > 0 && memory.last_delta[slot].has_value()) {
            sum += static_cast<double>(stale) * *memory.last_delta[slot];
        }
    }
    // Memory refresh happens after the sum so that this round's failures see
    // the previous round's state.
    for (const auto& [id, n] : delivered.counts()) {
        const auto slot = static_cast<std::size_t>(id);
        memory.last_delta[slot] = delta_for(deltas, id);
        memory.last_round[slot] = round;
    }
    return model - (eta / sample_count) * sum;
}

Vec aggregate_fednova(const Vec& model, const ClientMultiset& delivered,
                      const std::map<int, Vec>& deltas, const std::vector<double>& l1_norms,
                      double tau_eff, int sample_count, double eta) {
    check_sample_count(sample_count, eta);
    if (!(tau_eff > 0.0)) {
        throw WrongShape("tau_eff must be positive");
    }
    Vec sum = Vec::Zero(model.size());
    for (const auto& [id, n] : delivered.counts()) {
        if (id < 0 || id >= static_cast<int>(l1_norms.size())) {
            throw WrongShape("delivered client id outside l1 norm vector");
        }
        const double l1 = l1_norms[static_cast<std::size_t>(id)];
        if (!(l1 > 0.0)) {
            throw WrongShape("accumulation l1 norms must be positive");
        }
        sum += (static_cast<double>(n) / l1) * delta_for(deltas, id);
    }
    return model - (eta * tau_eff / sample_count) * sum;
}

}  // namespace fedsim
