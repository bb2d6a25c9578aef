#include "fedsim/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedsim {

namespace {

std::vector<double> normalized(std::vector<double> raw) {
    double sum = 0.0;
    for (double v : raw) {
        sum += v;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw WrongShape("selection weights must have a positive finite total");
    }
    for (double& v : raw) {
        v /= sum;
    }
    return raw;
}

void check_weights(const std::vector<double>& weights) {
    if (weights.empty()) {
        throw WrongShape("weight vector must be nonempty");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw WeightSumError("weights must be positive and finite");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << "weights must sum to 1 within 1e-10, got " << sum;
        throw WeightSumError(msg.str());
    }
}

}  // namespace

ProbabilityVector ProbabilityVector::from(std::vector<double> p) {
    if (p.empty()) {
        throw WrongShape("probability vector must be nonempty");
    }
    double sum = 0.0;
    for (double v : p) {
        if (!(v > 0.0 && v <= 1.0)) {
            throw WrongShape("probabilities must lie in (0, 1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << "probabilities must sum to 1 within 1e-10, got " << sum;
        throw WrongShape(msg.str());
    }
    ProbabilityVector out;
    out.p = std::move(p);
    return out;
}

ProbabilityVector probs_importance(const std::vector<double>& weights) {
    check_weights(weights);
    return ProbabilityVector::from(weights);
}

ProbabilityVector probs_uniform(int clients) {
    if (clients < 1) {
        throw WrongShape("client count must be >= 1");
    }
    return ProbabilityVector::from(
        std::vector<double>(static_cast<std::size_t>(clients), 1.0 / clients));
}

ProbabilityVector probs_optimal_sampling(const std::vector<double>& weights,
                                         const std::vector<double>& grad_norms,
                                         double norm_floor) {
    check_weights(weights);
    if (grad_norms.size() != weights.size()) {
        throw WrongShape("gradient norm vector size must match weight vector size");
    }
    bool any_positive = false;
    for (double n : grad_norms) {
        if (!(n >= 0.0) || !std::isfinite(n)) {
            throw WrongShape("gradient norms must be nonnegative and finite");
        }
        any_positive = any_positive || n > 0.0;
    }
    if (!any_positive) {
        throw AllZeroGradients("every client gradient norm is zero");
    }
    std::vector<double> raw(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) {
        raw[m] = weights[m] * std::max(grad_norms[m], norm_floor);
    }
    return ProbabilityVector::from(normalized(std::move(raw)));
}

ProbabilityVector probs_fedacs(const std::vector<double>& weights,
                               const std::vector<double>& failure_probs,
                               const std::vector<double>& l1_norms) {
    check_weights(weights);
    if (failure_probs.size() != weights.size() || l1_norms.size() != weights.size()) {
        throw WrongShape("failure probability and l1 norm vectors must match weight vector size");
    }
    std::vector<double> raw(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) {
        if (failure_probs[m] >= 1.0 - 1e-9) {
            std::ostringstream msg;
            msg << "client " << m << ": failure probability " << failure_probs[m]
                << " too close to 1 for heterogeneity-aware sampling";
            throw DegenerateLink(msg.str());
        }
        if (!(failure_probs[m] >= 0.0)) {
            throw BadSchedule("failure probabilities must be nonnegative");
        }
        if (!(l1_norms[m] > 0.0)) {
            throw WrongShape("accumulation l1 norms must be positive");
        }
        raw[m] = weights[m] / ((1.0 - failure_probs[m]) * l1_norms[m]);
    }
    return ProbabilityVector::from(normalized(std::move(raw)));
}

ClientMultiset draw_multiset(const ProbabilityVector& probs, int count, RandomStream& rng) {
    if (count < 0) {
        throw WrongShape("selection count must be nonnegative");
    }
    ClientMultiset out;
    const auto m = probs.p.size();
    for (int k = 0; k < count; ++k) {
        const double u = rng.uniform();
        double cumulative = 0.0;
        std::size_t pick = m - 1;
        for (std::size_t i = 0; i < m; ++i) {
            cumulative += probs.p[i];
            if (u < cumulative) {
                pick = i;
                break;
            }
        }
        out.add(static_cast<int>(pick));
    }
    return out;
}

}  // namespace fedsim
