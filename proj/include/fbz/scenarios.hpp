#ifndef FBZ_SCENARIOS_HPP
#define FBZ_SCENARIOS_HPP

#include <string>

#include "fbz/collision.hpp"
#include "fbz/config.hpp"

namespace fbz {

// Exit/status codes shared by the scenarios, the C facade and the CLI.
// 0 success, 1 internal error, 2 configuration error, 3 I/O error.
// Scenario assertion failures:
//   11 conservation drift          (relax)
//   12 entropy monotonicity        (relax)
//   13 relaxation target missed    (relax)
//   21 action value too large      (audit)
//   22 perturbation gap too small  (audit)
//   31 degeneracy norms            (structure-check)
//   32 structure identities        (structure-check)
//   33 operator form defects       (structure-check)
enum StatusCode : int {
    status_ok = 0,
    status_internal = 1,
    status_config = 2,
    status_io = 3,
    status_conservation = 11,
    status_entropy_monotone = 12,
    status_relax_target = 13,
    status_action_value = 21,
    status_perturbation_gap = 22,
    status_degeneracy = 31,
    status_identities = 32,
    status_forms = 33,
};

// Builds the tuple space for the configured backend (loading or building the
// DVM table as needed).
TupleSpace build_tuple_space(const RunConfig& cfg);

// Spatially uniform symmetric two-bump state: half Gaussians at +-speed e1.
Density two_bump_state(const PhaseGrid& g, double speed, double temperature);

int scenario_relax(const RunConfig& cfg);
int scenario_variational_audit(const RunConfig& cfg);
int scenario_structure_check(const RunConfig& cfg);

// dispatch on cfg.scenario
int run_scenario(const RunConfig& cfg);

}  // namespace fbz

#endif
