#pragma once

#include <array>
#include <utility>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim {

/// Family of per-client objectives F_m(x) = 0.5 * |x - anchors[m]|^2 with
/// optional additive gradient noise of total variance sigma_sq.  Serves as
/// the closed-form ground truth for every convergence check.
struct QuadraticProblem {
    std::vector<Vec> anchors;
    double sigma_sq = 0.0;

    int clients() const { return static_cast<int>(anchors.size()); }
    Eigen::Index dim() const { return anchors.empty() ? 0 : anchors.front().size(); }

    double value(int m, const Vec& x) const;
    Vec grad(int m, const Vec& x) const;
    /// Allocation-free form of grad for the simulation hot path.
    void grad_into(int m, const Vec& x, Vec& out) const;

    double global_value(const Vec& x, const std::vector<double>& weights) const;
    Vec global_grad(const Vec& x, const std::vector<double>& weights) const;

    /// Minimizer of the weighted mixture: sum_m weights[m] * anchors[m].
    Vec true_optimum(const std::vector<double>& weights) const;

    void validate() const;
};

/// Gradient dissimilarity constants (beta^2, kappa^2) of the symmetric
/// two-client scalar family with anchors -e and +e under surrogate weights
/// omega_eff: beta^2 = 1 and kappa^2 = 4 * omega_eff[0] * omega_eff[1] * e^2.
std::pair<double, double> dissimilarity_constants_2client(const std::vector<double>& omega_eff,
                                                          double e);

/// Closed-form description of the symmetric two-client scalar instance with
/// anchors (-e, +e), uniform target weights, and full participation: where
/// plain averaging converges, how far that is from the target, and the
/// resulting error floor.  The identity |grad F(surrogate_opt)|^2 ==
/// chi_square * kappa_sq holds exactly.
struct AchievabilityInstance {
    std::array<double, 2> omega_eff{};
    double surrogate_opt = 0.0;
    double chi_square = 0.0;
    double kappa_sq = 0.0;
    double limit_grad_sq = 0.0;
};

AchievabilityInstance achievability_instance(std::pair<int, int> local_steps,
                                             std::pair<double, double> failure_probs, double e);

/// Empirical estimate of kappa^2 as the maximum over probe points of
/// sum_m weights[m] * |grad_m(x)|^2 - |grad F(x)|^2; exact and
/// x-independent for this quadratic family.
double estimate_kappa_sq(const QuadraticProblem& problem, const std::vector<double>& weights,
                         const std::vector<Vec>& probes);

}  // namespace fedsim
