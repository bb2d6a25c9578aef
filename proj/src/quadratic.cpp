#include "fedsim/quadratic.hpp"

#include <cmath>
#include <sstream>

namespace fedsim {

namespace {

void check_weights_size(const QuadraticProblem& problem, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != problem.clients()) {
        throw WrongShape("weight vector size must match client count");
    }
}

}  // namespace

void QuadraticProblem::validate() const {
    if (anchors.empty()) {
        throw WrongShape("quadratic family needs at least one anchor");
    }
    const auto d = anchors.front().size();
    if (d < 1) {
        throw WrongShape("anchor dimension must be >= 1");
    }
    for (const Vec& e : anchors) {
        if (e.size() != d) {
            throw WrongShape("anchors must share one dimension");
        }
        if (!e.allFinite()) {
            throw WrongShape("anchors must be finite");
        }
    }
    if (!(sigma_sq >= 0.0)) {
        throw WrongShape("noise variance must be nonnegative");
    }
}

double QuadraticProblem::value(int m, const Vec& x) const {
    return 0.5 * (x - anchors.at(static_cast<std::size_t>(m))).squaredNorm();
}

Vec QuadraticProblem::grad(int m, const Vec& x) const {
    return x - anchors.at(static_cast<std::size_t>(m));
}

void QuadraticProblem::grad_into(int m, const Vec& x, Vec& out) const {
    out = x - anchors.at(static_cast<std::size_t>(m));
}

double QuadraticProblem::global_value(const Vec& x, const std::vector<double>& weights) const {
    check_weights_size(*this, weights);
    double out = 0.0;
    for (int m = 0; m < clients(); ++m) {
        out += weights[static_cast<std::size_t>(m)] * value(m, x);
    }
    return out;
}

Vec QuadraticProblem::global_grad(const Vec& x, const std::vector<double>& weights) const {
    check_weights_size(*this, weights);
    Vec out = Vec::Zero(x.size());
    for (int m = 0; m < clients(); ++m) {
        out += weights[static_cast<std::size_t>(m)] * grad(m, x);
    }
    return out;
}

Vec QuadraticProblem::true_optimum(const std::vector<double>& weights) const {
    check_weights_size(*this, weights);
    double sum = 0.0;
    for (double w : weights) {
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << "weights must sum to 1 within 1e-10, got " << sum;
        throw WeightSumError(msg.str());
    }
    Vec out = Vec::Zero(dim());
    for (int m = 0; m < clients(); ++m) {
        out += weights[static_cast<std::size_t>(m)] * anchors[static_cast<std::size_t>(m)];
    }
    return out;
}

std::pair<double, double> dissimilarity_constants_2client(const std::vector<double>& omega_eff,
                                                          double e) {
    if (omega_eff.size() != 2) {
        throw WrongShape("dissimilarity constants require exactly two clients");
    }
    return {1.0, 4.0 * omega_eff[0] * omega_eff[1] * e * e};
}

AchievabilityInstance achievability_instance(std::pair<int, int> local_steps,
                                             std::pair<double, double> failure_probs, double e) {
    const auto [t1, t2] = local_steps;
    const auto [q1, q2] = failure_probs;
    if (t1 < 1 || t2 < 1) {
        throw BadSchedule("local step counts must be >= 1");
    }
    if (!(q1 >= 0.0 && q1 < 1.0 && q2 >= 0.0 && q2 < 1.0)) {
        throw BadSchedule("failure probabilities must lie in [0, 1)");
    }
    const double s1 = (1.0 - q1) * t1;
    const double s2 = (1.0 - q2) * t2;
    AchievabilityInstance out;
    out.omega_eff = {s1 / (s1 + s2), s2 / (s1 + s2)};
    // Anchors are (-e, +e), so the surrogate optimum is e*(omega_2 - omega_1)
    // while the target optimum sits at the origin.
    out.surrogate_opt = e * (out.omega_eff[1] - out.omega_eff[0]);
    out.chi_square = (s2 - s1) * (s2 - s1) / (4.0 * s1 * s2);
    out.kappa_sq = 4.0 * out.omega_eff[0] * out.omega_eff[1] * e * e;
    out.limit_grad_sq = out.chi_square * out.kappa_sq;
    return out;
}

double estimate_kappa_sq(const QuadraticProblem& problem, const std::vector<double>& weights,
                         const std::vector<Vec>& probes) {
    check_weights_size(problem, weights);
    if (probes.empty()) {
        throw WrongShape("kappa estimation needs at least one probe point");
    }
    double best = 0.0;
    for (const Vec& x : probes) {
        double weighted = 0.0;
        for (int m = 0; m < problem.clients(); ++m) {
            weighted += weights[static_cast<std::size_t>(m)] * problem.grad(m, x).squaredNorm();
        }
        const double excess = weighted - problem.global_grad(x, weights).squaredNorm();
        best = std::max(best, excess);
    }
    return best;
}

}  // namespace fedsim
