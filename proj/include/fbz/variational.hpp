#ifndef FBZ_VARIATIONAL_HPP
#define FBZ_VARIATIONAL_HPP

#include <string>
#include <vector>

#include "fbz/collision.hpp"
#include "fbz/dissipation.hpp"
#include "fbz/state.hpp"

namespace fbz {

// Time-discrete curve (f_t, U_t): densities at the node times, one flux per
// interval held at the midpoint. Solver runs store the half-transported
// pre-collision state as the flux base, which keeps the recorded pair
// second-order consistent.
struct Trajectory {
    std::vector<double> times;       // increasing node times
    std::vector<Density> densities;  // one per node time
    std::vector<double> mid_times;   // one per interval
    std::vector<CollisionFlux> fluxes;
    bool solver_produced = false;

    std::size_t steps() const { return mid_times.size(); }
    void validate() const;

    // directory layout: manifest.txt + one snapshot file per stored density
    void save(const std::string& dir) const;
    static Trajectory load(const std::string& dir);
};

struct AuditReport {
    double tcre_residual_max = 0.0;
    double chain_rule_defect = 0.0;
    double l_value = 0.0;
    double entropy_identity_defect = 0.0;
    // per-term breakdown of the action functional
    double delta_H = 0.0;
    double int_d_psi_star = 0.0;
    double int_big_R = 0.0;
    double flux_total_variation = 0.0;
    // computed discretization slack: the action of the discrete pair may dip
    // below zero by at most the accumulated chain-rule defect
    double numerical_tolerance = 0.0;
    std::size_t infinite_tuples = 0;     // +inf branches hit inside D_psi*/R
    std::size_t gate_violations = 0;     // flux carried by theta = 0 tuples
};

// Max over intervals and test functions of
//   |(int phi dmu_{n+1} - int phi dmu_n) - dt (int v . grad_x phi dmu_mid
//     + 1/4 sum gradbar(phi) U w)|.
// The canonical invariants {1, v_1, |v|^2} are always prepended.
double tcre_residual(const TupleSpace& ts, const Trajectory& traj,
                     const std::vector<std::vector<double>>& extra_test_functions = {});

// Max over intervals of |dH - dt/4 sum_{theta>0} gradbar(log f_mid) U w|.
double chain_rule_defect(const TupleSpace& ts, const Trajectory& traj,
                         std::size_t* gate_violations = nullptr);

// Max over nodes of |H(f_n) - H(f_0) + trapezoid integral of D|.
double entropy_identity_defect(const TupleSpace& ts, const Trajectory& traj);

// Action functional H(f_T) - H(f_0) + int D_psi* + int R and its parts,
// together with the other audit diagnostics.
AuditReport l_functional(const TupleSpace& ts, const Trajectory& traj, GradStructure st);

// canonical test functions as grid functions
std::vector<double> test_fn_one(const PhaseGrid& g);
std::vector<double> test_fn_v1(const PhaseGrid& g);
std::vector<double> test_fn_speed2(const PhaseGrid& g);

}  // namespace fbz

#endif
