#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "fedsim/types.hpp"

namespace fedsim {

/// Computes the surrogate objective induced by selection probabilities p,
/// failure probabilities q, and accumulation masses l1:
///   gamma_m = p_m(1-q_m) / sum_j p_j(1-q_j)
///   eta_eff_factor = sum_j p_j(1-q_j)
///   t_eff = sum_m gamma_m l1_m
///   omega_eff_m = gamma_m l1_m / t_eff
///   chi_square = sum_m (weights_m - omega_eff_m)^2 / omega_eff_m
SurrogateStats surrogate_stats(const std::vector<double>& p,
                               const std::vector<double>& failure_probs,
                               const std::vector<double>& l1_norms,
                               const std::vector<double>& weights);

/// Minimizer of the omega_eff-weighted quadratic mixture: sum_m omega_eff_m * anchors_m.
Vec surrogate_optimum_quadratic(const std::vector<Vec>& anchors,
                                const std::vector<double>& omega_eff);

/// Upper bound on the running average of the squared surrogate gradient norm
/// after `rounds` rounds:
///   4*gap/(eta_eff*t_eff*rounds) + eta_eff*t_eff*kappa^2/beta^2
///   + 2*eta*lipschitz*max_l1^2*sigma^2/t_eff.
/// `eta_eff` is the full effective step length (base step times factor).
double theorem1_bound(double surrogate_gap, double eta, double eta_eff, double t_eff,
                      double rounds, double kappa, double beta, double lipschitz, double max_l1,
                      double sigma);

/// Contraction factor of the one-round descent inequality; tends to 1/2 as
/// eta -> 0.  The bound above is valid when this is at most 3/4.
double rho_factor(double eta, double lipschitz, double max_l1);

bool small_eta_condition_holds(double eta, double lipschitz, double max_l1);

/// Asymptotic error floors of the true objective: (chi^2 kappa^2,
/// chi^2 kappa^2 + sigma^2) for the full-batch and stochastic cases.
std::pair<double, double> theorem2_limit(double chi_square, double kappa, double sigma);

/// A communication/computation system completed so that (1-q_m)*l1_m is the
/// same for every client, which makes the surrogate equal the target mixture
/// under p = weights.
struct CodesignResult {
    std::vector<double> failure_probs;
    std::vector<double> l1_norms;
    double eta_eff_factor = 0.0;
    double t_eff = 0.0;
};

/// Given the full failure probability vector, completes the accumulation
/// masses from the anchor client-0 mass.
CodesignResult codesign_complete_l1(const std::vector<double>& weights,
                                    const std::vector<double>& failure_probs, double anchor_l1);

/// Given the full accumulation mass vector, completes the failure
/// probabilities from the anchor client-0 probability.  Throws
/// InfeasibleDesign when a completed probability would be negative.
CodesignResult codesign_complete_q(const std::vector<double>& weights,
                                   const std::vector<double>& l1_norms, double anchor_q);

/// The linear system governing consistency: W(i,j) = (weights_j - [i==j]) * l1_j.
/// The weighted row combination sum_m weights_m * row_m vanishes, so the
/// system is rank-deficient and admits a nonzero delivery-rate solution.
struct ConsistencyMatrix {
    Eigen::MatrixXd w;
    double rank_residual = 0.0;
};

ConsistencyMatrix build_consistency_matrix(const std::vector<double>& weights,
                                           const std::vector<double>& l1_norms);

/// Per-algorithm step lengths chosen so that every benchmark runs at the
/// reference effective step eta_eff * t_eff of plain averaging at base_eta.
struct StepCalibration {
    double fedavg = 0.0;
    double fedacs = 0.0;
    double ca_fedavg = 0.0;
    double fedvarp = 0.0;
    double fednova = 0.0;
    double optimal_sampling = 0.0;
    double reference_product = 0.0;

    double for_method(Method method) const;
};

StepCalibration calibrate_step_lengths(double base_eta, const std::vector<double>& weights,
                                       const std::vector<double>& failure_probs,
                                       const std::vector<double>& l1_norms);

/// Recomputes eta_eff * t_eff for one algorithm at step length eta; used to
/// verify that a calibration actually matches effective steps.
double effective_step_product(Method method, double eta, const std::vector<double>& weights,
                              const std::vector<double>& failure_probs,
                              const std::vector<double>& l1_norms);

}  // namespace fedsim
