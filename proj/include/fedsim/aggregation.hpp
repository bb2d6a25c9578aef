#pragma once

#include <map>
#include <optional>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim {

/// Per-client cache of the last successfully delivered update, used by the
/// variance-reduced aggregator to stand in for selected-but-failed uploads.
struct VarpMemory {
    std::vector<std::optional<Vec>> last_delta;
    std::vector<std::int64_t> last_round;

    explicit VarpMemory(int clients)
        : last_delta(static_cast<std::size_t>(clients)),
          last_round(static_cast<std::size_t>(clients), -1) {}
    int clients() const { return static_cast<int>(last_delta.size()); }
};

/// Anonymous averaging: the server adds -eta/K times every delivered update,
/// counting multiplicity, without identifying senders.
Vec aggregate_anonymous(const Vec& model, const ClientMultiset& delivered,
                        const std::map<int, Vec>& deltas, int sample_count, double eta);

/// Inverse-delivery-probability weighting: each delivered instance is scaled
/// by 1/(1 - failure_probs[m]) before the anonymous sum, which unbiases the
/// aggregate against link failures.
Vec aggregate_ca_fedavg(const Vec& model, const ClientMultiset& delivered,
                        const std::map<int, Vec>& deltas,
                        const std::vector<double>& failure_probs, int sample_count, double eta);

/// Memory substitution: delivered instances contribute fresh updates and
/// refresh the memory; selected-but-failed instances contribute the stored
/// update (zero when none exists yet).
Vec aggregate_fedvarp(const Vec& model, const ClientMultiset& selected,
                      const ClientMultiset& delivered, const std::map<int, Vec>& deltas,
                      VarpMemory& memory, std::int64_t round, int sample_count, double eta);

/// Normalized averaging: each delivered update is divided by its solver's
/// accumulation mass and the sum is rescaled by tau_eff, which removes the
/// structural skew from unequal local work while keeping the step length.
Vec aggregate_fednova(const Vec& model, const ClientMultiset& delivered,
                      const std::map<int, Vec>& deltas, const std::vector<double>& l1_norms,
                      double tau_eff, int sample_count, double eta);

}  // namespace fedsim
