#include "fedsim/local_solver.hpp"

#include <cmath>
#include <sstream>

namespace fedsim {

namespace {

void check_steps(int steps) {
    if (steps < 1) {
        throw BadSchedule("local step count must be >= 1, got " + std::to_string(steps));
    }
}

void check_proximal_contraction(const SolverSpec& spec, double eta) {
    if (spec.kind == SolverKind::ProximalSgd && eta * spec.param >= 1.0) {
        std::ostringstream msg;
        msg << "proximal solver requires eta * mu < 1, got " << eta * spec.param;
        throw NonContractive(msg.str());
    }
}

}  // namespace

AccumulationVector accumulation_vector(const SolverSpec& spec, int steps, double eta) {
    check_steps(steps);
    check_proximal_contraction(spec, eta);
    std::vector<double> coeffs(static_cast<std::size_t>(steps), 1.0);
    switch (spec.kind) {
        case SolverKind::PlainSgd:
            break;
        case SolverKind::MomentumSgd: {
            // a_t = 1 + rho + ... + rho^(T-t); build the partial geometric
            // sums from the shortest one up.
            double partial = 0.0;
            double power = 1.0;
            for (int k = 0; k < steps; ++k) {
                partial += power;
                power *= spec.param;
                coeffs[static_cast<std::size_t>(steps - 1 - k)] = partial;
            }
            break;
        }
        case SolverKind::ProximalSgd: {
            // a_t = (1 - eta*mu)^(T-t): later gradients are attenuated less.
            const double shrink = 1.0 - eta * spec.param;
            double power = 1.0;
            for (int k = 0; k < steps; ++k) {
                coeffs[static_cast<std::size_t>(steps - 1 - k)] = power;
                power *= shrink;
            }
            break;
        }
        case SolverKind::DecayedSgd: {
            // a_t = (1 - rate)^(t-1): the local step length shrinks each step.
            const double shrink = 1.0 - spec.param;
            double power = 1.0;
            for (int t = 0; t < steps; ++t) {
                coeffs[static_cast<std::size_t>(t)] = power;
                power *= shrink;
            }
            break;
        }
    }
    return AccumulationVector::from_coeffs(std::move(coeffs));
}

double accumulation_l1(const SolverSpec& spec, int steps, double eta) {
    check_steps(steps);
    check_proximal_contraction(spec, eta);
    switch (spec.kind) {
        case SolverKind::PlainSgd:
            return static_cast<double>(steps);
        case SolverKind::MomentumSgd: {
            double total = 0.0;
            double partial = 0.0;
            double power = 1.0;
            for (int k = 0; k < steps; ++k) {
                partial += power;
                power *= spec.param;
                total += partial;
            }
            return total;
        }
        case SolverKind::ProximalSgd: {
            const double shrink = 1.0 - eta * spec.param;
            double total = 0.0;
            double power = 1.0;
            for (int k = 0; k < steps; ++k) {
                total += power;
                power *= shrink;
            }
            return total;
        }
        case SolverKind::DecayedSgd: {
            const double shrink = 1.0 - spec.param;
            double total = 0.0;
            double power = 1.0;
            for (int k = 0; k < steps; ++k) {
                total += power;
                power *= shrink;
            }
            return total;
        }
    }
    throw WrongShape("unknown solver kind");
}

void run_local_delta(const Vec& start, const GradientFn& grad, const SolverSpec& spec, int steps,
                     double eta, const NoiseSpec& noise, RandomStream& rng, double guard,
                     Vec& delta_out) {
    check_steps(steps);
    check_proximal_contraction(spec, eta);
    if (!grad) {
        throw WrongShape("run_local requires a gradient callback");
    }
    const auto dim = start.size();
    const double coord_sigma =
        noise.sigma_sq > 0.0 ? std::sqrt(noise.sigma_sq / static_cast<double>(dim)) : 0.0;

    // The iterate is maintained as start - eta * S with S the running
    // accumulated update, which makes the returned delta satisfy
    // final == start - eta * delta exactly.
    delta_out.setZero(dim);
    Vec iterate = start;
    Vec g(dim);
    Vec momentum_buffer;
    if (spec.kind == SolverKind::MomentumSgd) {
        momentum_buffer.setZero(dim);
    }
    double decay_coeff = 1.0;
    const double proximal_shrink = 1.0 - eta * spec.param;

    for (int t = 1; t <= steps; ++t) {
        grad(iterate, t, g);
        if (g.size() != dim) {
            std::ostringstream msg;
            msg << "gradient dimension " << g.size() << " does not match iterate dimension " << dim;
            throw WrongShape(msg.str());
        }
        if (coord_sigma > 0.0) {
            for (Eigen::Index i = 0; i < dim; ++i) {
                g[i] += coord_sigma * rng.gaussian();
            }
        }
        switch (spec.kind) {
            case SolverKind::PlainSgd:
                delta_out += g;
                break;
            case SolverKind::MomentumSgd:
                momentum_buffer = spec.param * momentum_buffer + g;
                delta_out += momentum_buffer;
                break;
            case SolverKind::ProximalSgd:
                delta_out = proximal_shrink * delta_out + g;
                break;
            case SolverKind::DecayedSgd:
                delta_out += decay_coeff * g;
                decay_coeff *= 1.0 - spec.param;
                break;
        }
        iterate = start - eta * delta_out;
        const double norm = iterate.norm();
        if (!std::isfinite(norm) || norm > guard) {
            std::ostringstream msg;
            msg << "iterate norm " << norm << " exceeded guard " << guard << " at local step " << t;
            throw NumericalBlowup(msg.str());
        }
    }
}

LocalRunResult run_local(const Vec& start, const GradientFn& grad, const SolverSpec& spec,
                         int steps, double eta, const NoiseSpec& noise, RandomStream& rng,
                         double guard) {
    LocalRunResult out;
    run_local_delta(start, grad, spec, steps, eta, noise, rng, guard, out.delta);
    // Recomputes the identical expression the step loop maintained, so the
    // postcondition holds bitwise.
    out.final_iterate = start - eta * out.delta;
    out.accum = accumulation_vector(spec, steps, eta);
    return out;
}

AccumulationVector extract_coefficients(const SolverSpec& spec, int steps, double eta) {
    check_steps(steps);
    // Feed the t-th basis vector of R^steps as the gradient of step t; the
    // coordinates of delta are then exactly the per-step weights.
    const GradientFn basis_stream = [](const Vec&, int t, Vec& out) {
        out.setZero();
        out[t - 1] = 1.0;
    };
    RandomStream unused(0);
    const Vec start = Vec::Zero(steps);
    const LocalRunResult run =
        run_local(start, basis_stream, spec, steps, eta, NoiseSpec{}, unused);
    std::vector<double> coeffs(run.delta.data(), run.delta.data() + run.delta.size());
    return AccumulationVector::from_coeffs(std::move(coeffs));
}

}  // namespace fedsim
