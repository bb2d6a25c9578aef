#pragma once

#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Client selection distribution over the open simplex (every entry in
/// (0, 1], entries summing to one within 1e-10).
struct ProbabilityVector {
    std::vector<double> p;

    static ProbabilityVector from(std::vector<double> p);
    int size() const { return static_cast<int>(p.size()); }
};

/// Importance sampling: select clients proportionally to their data weights.
ProbabilityVector probs_importance(const std::vector<double>& weights);

/// Uniform selection over `clients` clients.
ProbabilityVector probs_uniform(int clients);

/// Gradient-norm weighted selection: p_m proportional to
/// weights[m] * max(grad_norms[m], norm_floor).  The floor keeps zero-norm
/// clients selectable; throws AllZeroGradients when every norm is zero.
ProbabilityVector probs_optimal_sampling(const std::vector<double>& weights,
                                         const std::vector<double>& grad_norms,
                                         double norm_floor = 1e-6);

/// Heterogeneity-aware selection: p_m proportional to
/// weights[m] / ((1 - failure_probs[m]) * l1_norms[m]).  This choice makes
/// the induced surrogate weights equal the data weights exactly.
ProbabilityVector probs_fedacs(const std::vector<double>& weights,
                               const std::vector<double>& failure_probs,
                               const std::vector<double>& l1_norms);

/// Draws `count` clients independently with replacement via inverse-CDF on
/// one uniform per draw.
ClientMultiset draw_multiset(const ProbabilityVector& probs, int count, RandomStream& rng);

}  // namespace fedsim
