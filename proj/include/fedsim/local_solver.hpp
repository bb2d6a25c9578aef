#pragma once

#include <functional>

#include "fedsim/rng.hpp"
#include "fedsim/types.hpp"

namespace fedsim {

/// Client-side gradient callback: writes the gradient of the client's
/// objective at `x` (1-based step index `step`) into `out`, which arrives
/// pre-sized to x.size().  Writer form so tight simulation loops do not
/// allocate a fresh vector per step.
using GradientFn = std::function<void(const Vec& x, int step, Vec& out)>;

/// Additive stochastic gradient noise.  `sigma_sq` is the total variance of
/// the noise vector; it is split evenly across coordinates.
struct NoiseSpec {
    double sigma_sq = 0.0;
};

struct LocalRunResult {
    Vec delta;
    Vec final_iterate;
    AccumulationVector accum;
};

/// Closed-form per-step gradient weights for a solver running `steps` local
/// steps at step length `eta`.  Throws NonContractive when a proximal solver
/// is configured with eta * mu >= 1.
AccumulationVector accumulation_vector(const SolverSpec& spec, int steps, double eta);

/// Total mass of the accumulation vector, computed without materializing the
/// coefficients; agrees with accumulation_vector(...).l1 up to rounding.
double accumulation_l1(const SolverSpec& spec, int steps, double eta);

/// Runs one client's local optimization and returns the accumulated update
/// `delta` with final iterate exactly `start - eta * delta`.  Throws
/// NumericalBlowup when any iterate norm exceeds `guard`.
LocalRunResult run_local(const Vec& start, const GradientFn& grad, const SolverSpec& spec,
                         int steps, double eta, const NoiseSpec& noise, RandomStream& rng,
                         double guard = 1e12);

/// Core of run_local for the simulation hot path: writes the accumulated
/// update into `delta_out` and skips materializing the coefficient vector
/// and the final iterate (recoverable as start - eta * delta_out).
void run_local_delta(const Vec& start, const GradientFn& grad, const SolverSpec& spec, int steps,
                     double eta, const NoiseSpec& noise, RandomStream& rng, double guard,
                     Vec& delta_out);

/// Recovers the accumulation vector a solver actually realizes by driving
/// run_local with a basis-vector gradient stream and reading off the
/// coefficients of delta.
AccumulationVector extract_coefficients(const SolverSpec& spec, int steps, double eta);

}  // namespace fedsim
