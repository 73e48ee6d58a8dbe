#ifndef FBZ_SOLVER_HPP
#define FBZ_SOLVER_HPP

#include <functional>
#include <vector>

#include "fbz/collision.hpp"
#include "fbz/state.hpp"
#include "fbz/variational.hpp"

namespace fbz {

struct SolverConfig {
    double dt = 0.01;
    double t_end = 1.0;
    enum class Stepper { euler, duhamel, strang } stepper = Stepper::strang;
    bool record_flux = false;
    bool positivity_guard = true;
    int checkpoint_every = 0;  // snapshots every k steps when > 0 (run caller's job)
};

// One diagnostics record per step; D/D_psi*/R are filled by the caller layer
// that knows the configured structure.
struct StepSample {
    int step = 0;
    double t = 0.0;
    const Density* density = nullptr;
    const Density* midpoint = nullptr;  // pre-collision state, null unless recorded
};

// Exact-characteristic advection x -> x - v dt per velocity node: an integer
// circular shift plus a two-point convex split of the fractional part, per
// axis. Mass per velocity node is exact, positivity is preserved, and the
// map is doubly stochastic so entropy cannot increase.
void transport_raw(const PhaseGrid& g, std::vector<double>& values, double dt);
Density transport_step(const Density& f, double dt);

// Collision substeps. euler requires dt * max_loss_rate <= 1 when the guard
// is on; duhamel is positivity-preserving for any dt with the computed
// damping rate c0 = c * mass(f0), c = 2 * (sup loss coefficient).
Density collision_step(const TupleSpace& ts, const Density& f, double dt,
                       const SolverConfig& cfg);
// Second-order collision substep used inside strang: the explicit-trapezoid
// average of two euler stages (a convex combination, so the guard still
// implies positivity).
Density collision_heun(const TupleSpace& ts, const Density& f, double dt,
                       const SolverConfig& cfg);
Density strang_step(const TupleSpace& ts, const Density& f, double dt, const SolverConfig& cfg);

// Full run: densities at every step, optional midpoint fluxes, a sample
// callback per step (including step 0). NaNs abort with the offending step.
Trajectory run(const TupleSpace& ts, const Density& f0, const SolverConfig& cfg,
               const std::function<void(const StepSample&)>& on_step = {});

// The positivity/monotonicity damping coefficient: twice the sup over the
// velocity box of the loss coefficient per unit mass.
double damping_constant(const TupleSpace& ts);

struct IterationResult {
    std::vector<std::vector<double>> iterates;  // final-time states per iterate
    bool converged = false;
    int iterations = 0;
    double final_gap = 0.0;            // L1 distance between the last two iterates
    std::vector<double> final_state;   // last iterate at t_end
};

// Constructive fixed-point iteration in damped Duhamel form along
// characteristics, starting from the zero function. Iterates are
// nonnegative, cellwise nondecreasing and mass-bounded by f0; violations
// beyond 1e-12 indicate a damping constant below the admissible threshold
// and raise an error.
IterationResult existence_iteration(const TupleSpace& ts, const Density& f0, double dt,
                                    double t_end, int n_max, double tol);

}  // namespace fbz

#endif
