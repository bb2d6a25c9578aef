#include "fedsim/analysis.hpp"

#include <cmath>
#include <sstream>

namespace fedsim {

namespace {

void check_system(const std::vector<double>& failure_probs, const std::vector<double>& l1_norms,
                  std::size_t clients) {
    if (failure_probs.size() != clients || l1_norms.size() != clients) {
        throw WrongShape("failure probability and l1 norm vectors must match client count");
    }
    for (std::size_t m = 0; m < clients; ++m) {
        if (!(failure_probs[m] >= 0.0 && failure_probs[m] < 1.0)) {
            throw BadSchedule("failure probabilities must lie in [0, 1)");
        }
        if (!(l1_norms[m] > 0.0)) {
            throw WrongShape("accumulation l1 norms must be positive");
        }
    }
}

void check_simplex(const std::vector<double>& v, const char* what) {
    if (v.empty()) {
        throw WrongShape(std::string(what) + " must be nonempty");
    }
    double sum = 0.0;
    for (double x : v) {
        if (!(x > 0.0 && x <= 1.0)) {
            throw WrongShape(std::string(what) + " entries must lie in (0, 1]");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << what << " must sum to 1 within 1e-10, got " << sum;
        throw WrongShape(msg.str());
    }
}

}  // namespace

SurrogateStats surrogate_stats(const std::vector<double>& p,
                               const std::vector<double>& failure_probs,
                               const std::vector<double>& l1_norms,
                               const std::vector<double>& weights) {
    check_simplex(p, "selection probabilities");
    check_simplex(weights, "client weights");
    if (weights.size() != p.size()) {
        throw WrongShape("weight vector size must match probability vector size");
    }
    check_system(failure_probs, l1_norms, p.size());

    const std::size_t clients = p.size();
    SurrogateStats out;
    out.gamma.resize(clients);
    out.omega_eff.resize(clients);

    double delivered_mass = 0.0;
    for (std::size_t m = 0; m < clients; ++m) {
        delivered_mass += p[m] * (1.0 - failure_probs[m]);
    }
    out.eta_eff_factor = delivered_mass;

    double t_eff = 0.0;
    for (std::size_t m = 0; m < clients; ++m) {
        out.gamma[m] = p[m] * (1.0 - failure_probs[m]) / delivered_mass;
        t_eff += out.gamma[m] * l1_norms[m];
    }
    out.t_eff = t_eff;

    double chi = 0.0;
    for (std::size_t m = 0; m < clients; ++m) {
        out.omega_eff[m] = out.gamma[m] * l1_norms[m] / t_eff;
        const double diff = weights[m] - out.omega_eff[m];
        chi += diff * diff / out.omega_eff[m];
    }
    out.chi_square = chi;
    return out;
}

Vec surrogate_optimum_quadratic(const std::vector<Vec>& anchors,
                                const std::vector<double>& omega_eff) {
    check_simplex(omega_eff, "surrogate weights");
    if (anchors.size() != omega_eff.size()) {
        throw WrongShape("anchor count must match surrogate weight count");
    }
    Vec out = Vec::Zero(anchors.front().size());
    for (std::size_t m = 0; m < anchors.size(); ++m) {
        if (anchors[m].size() != out.size()) {
            throw WrongShape("anchors must share one dimension");
        }
        out += omega_eff[m] * anchors[m];
    }
    return out;
}

double theorem1_bound(double surrogate_gap, double eta, double eta_eff, double t_eff,
                      double rounds, double kappa, double beta, double lipschitz, double max_l1,
                      double sigma) {
    if (!(surrogate_gap >= 0.0 && kappa >= 0.0 && sigma >= 0.0)) {
        throw WrongShape("gap, kappa, and sigma must be nonnegative");
    }
    if (!(eta > 0.0 && eta_eff > 0.0 && t_eff > 0.0 && rounds > 0.0 && lipschitz > 0.0 &&
          max_l1 > 0.0)) {
        throw WrongShape("step lengths, T_eff, round count, L, and A must be positive");
    }
    if (!(beta >= 1.0)) {
        throw WrongShape("beta must be at least 1");
    }
    return 4.0 * surrogate_gap / (eta_eff * t_eff * rounds) +
           eta_eff * t_eff * kappa * kappa / (beta * beta) +
           2.0 * eta * lipschitz * max_l1 * max_l1 * sigma * sigma / t_eff;
}

double rho_factor(double eta, double lipschitz, double max_l1) {
    const double ela = eta * lipschitz * max_l1;
    const double denom = 1.0 - 2.0 * ela * ela;
    if (!(denom > 0.0)) {
        throw InfeasibleDesign("step length too large: 2(eta L A)^2 must be < 1");
    }
    return (2.0 * ela + 1.0) * (ela * ela / denom + 0.5);
}

bool small_eta_condition_holds(double eta, double lipschitz, double max_l1) {
    return rho_factor(eta, lipschitz, max_l1) <= 0.75;
}

std::pair<double, double> theorem2_limit(double chi_square, double kappa, double sigma) {
    if (!(chi_square >= 0.0 && kappa >= 0.0 && sigma >= 0.0)) {
        throw WrongShape("chi_square, kappa, and sigma must be nonnegative");
    }
    const double floor = chi_square * kappa * kappa;
    return {floor, floor + sigma * sigma};
}

namespace {

CodesignResult finish_codesign(const std::vector<double>& weights,
                               std::vector<double> failure_probs, std::vector<double> l1_norms) {
    CodesignResult out;
    double eta_factor = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        eta_factor += weights[m] * (1.0 - failure_probs[m]);
    }
    out.eta_eff_factor = eta_factor;
    out.t_eff = (1.0 - failure_probs.front()) * l1_norms.front() / eta_factor;
    out.failure_probs = std::move(failure_probs);
    out.l1_norms = std::move(l1_norms);
    return out;
}

}  // namespace

CodesignResult codesign_complete_l1(const std::vector<double>& weights,
                                    const std::vector<double>& failure_probs, double anchor_l1) {
    check_simplex(weights, "client weights");
    if (failure_probs.size() != weights.size()) {
        throw WrongShape("failure probability vector must match weight vector size");
    }
    if (!(anchor_l1 > 0.0)) {
        throw InfeasibleDesign("anchor accumulation mass must be positive");
    }
    for (double q : failure_probs) {
        if (!(q >= 0.0 && q < 1.0)) {
            throw BadSchedule("failure probabilities must lie in [0, 1)");
        }
    }
    const double target = (1.0 - failure_probs.front()) * anchor_l1;
    std::vector<double> l1(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) {
        l1[m] = target / (1.0 - failure_probs[m]);
    }
    return finish_codesign(weights, failure_probs, std::move(l1));
}

CodesignResult codesign_complete_q(const std::vector<double>& weights,
                                   const std::vector<double>& l1_norms, double anchor_q) {
    check_simplex(weights, "client weights");
    if (l1_norms.size() != weights.size()) {
        throw WrongShape("l1 norm vector must match weight vector size");
    }
    if (!(anchor_q >= 0.0 && anchor_q < 1.0)) {
        throw BadSchedule("anchor failure probability must lie in [0, 1)");
    }
    for (double l1 : l1_norms) {
        if (!(l1 > 0.0)) {
            throw WrongShape("accumulation l1 norms must be positive");
        }
    }
    const double target = (1.0 - anchor_q) * l1_norms.front();
    std::vector<double> q(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) {
        const double required = 1.0 - target / l1_norms[m];
        if (required < 0.0) {
            std::ostringstream msg;
            msg << "client " << m << " would need negative failure probability " << required
                << "; its accumulation mass " << l1_norms[m] << " is below the anchor product "
                << target;
            throw InfeasibleDesign(msg.str());
        }
        q[m] = required;
    }
    return finish_codesign(weights, std::move(q), l1_norms);
}

ConsistencyMatrix build_consistency_matrix(const std::vector<double>& weights,
                                           const std::vector<double>& l1_norms) {
    check_simplex(weights, "client weights");
    if (l1_norms.size() != weights.size()) {
        throw WrongShape("l1 norm vector must match weight vector size");
    }
    const auto clients = static_cast<Eigen::Index>(weights.size());
    ConsistencyMatrix out;
    out.w.resize(clients, clients);
    for (Eigen::Index i = 0; i < clients; ++i) {
        for (Eigen::Index j = 0; j < clients; ++j) {
            const double indicator = i == j ? 1.0 : 0.0;
            out.w(i, j) = (weights[static_cast<std::size_t>(j)] - indicator) *
                          l1_norms[static_cast<std::size_t>(j)];
        }
    }
    Eigen::VectorXd omega(clients);
    for (Eigen::Index i = 0; i < clients; ++i) {
        omega[i] = weights[static_cast<std::size_t>(i)];
    }
    out.rank_residual = (out.w.transpose() * omega).lpNorm<Eigen::Infinity>();
    return out;
}

double StepCalibration::for_method(Method method) const {
    switch (method) {
        case Method::FedAvg:
            return fedavg;
        case Method::FedAcs:
            return fedacs;
        case Method::CaFedAvg:
            return ca_fedavg;
        case Method::FedVarp:
            return fedvarp;
        case Method::FedNova:
            return fednova;
        case Method::OptimalSampling:
            return optimal_sampling;
    }
    return fedavg;
}

StepCalibration calibrate_step_lengths(double base_eta, const std::vector<double>& weights,
                                       const std::vector<double>& failure_probs,
                                       const std::vector<double>& l1_norms) {
    if (!(base_eta > 0.0)) {
        throw WrongShape("base step length must be positive");
    }
    check_simplex(weights, "client weights");
    check_system(failure_probs, l1_norms, weights.size());

    const SurrogateStats reference = surrogate_stats(weights, failure_probs, l1_norms, weights);
    const double product = base_eta * reference.eta_eff_factor * reference.t_eff;

    double inverse_mass = 0.0;
    double weighted_l1 = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        inverse_mass += weights[m] / ((1.0 - failure_probs[m]) * l1_norms[m]);
        weighted_l1 += weights[m] * l1_norms[m];
    }

    StepCalibration out;
    out.reference_product = product;
    out.fedavg = base_eta;
    out.fedacs = product * inverse_mass;
    out.ca_fedavg = product / weighted_l1;
    out.fedvarp = out.ca_fedavg;
    out.fednova = base_eta;
    out.optimal_sampling = base_eta;
    return out;
}

double effective_step_product(Method method, double eta, const std::vector<double>& weights,
                              const std::vector<double>& failure_probs,
                              const std::vector<double>& l1_norms) {
    switch (method) {
        case Method::FedAvg:
        case Method::OptimalSampling: {
            const SurrogateStats stats = surrogate_stats(weights, failure_probs, l1_norms, weights);
            return eta * stats.eta_eff_factor * stats.t_eff;
        }
        case Method::FedAcs: {
            double inverse_mass = 0.0;
            for (std::size_t m = 0; m < weights.size(); ++m) {
                inverse_mass += weights[m] / ((1.0 - failure_probs[m]) * l1_norms[m]);
            }
            return eta / inverse_mass;
        }
        case Method::CaFedAvg:
        case Method::FedVarp: {
            double weighted_l1 = 0.0;
            for (std::size_t m = 0; m < weights.size(); ++m) {
                weighted_l1 += weights[m] * l1_norms[m];
            }
            return eta * weighted_l1;
        }
        case Method::FedNova: {
            // Normalized updates rescaled by the reference t_eff: the product
            // matches plain averaging at the same eta by construction.
            const SurrogateStats stats = surrogate_stats(weights, failure_probs, l1_norms, weights);
            return eta * stats.eta_eff_factor * stats.t_eff;
        }
    }
    throw WrongShape("unknown method");
}

}  // namespace fedsim
