#ifndef FBZ_CONFIG_HPP
#define FBZ_CONFIG_HPP

#include <cstdint>
#include <string>

#include "fbz/dissipation.hpp"
#include "fbz/kernels.hpp"
#include "fbz/solver.hpp"
#include "fbz/state.hpp"

namespace fbz {

// Run configuration, parsed from a sectioned key = value text file. Unknown
// sections or keys are rejected; the full schema lives in the README and in
// the parser below.
struct RunConfig {
    std::string scenario = "relax";  // relax | audit | structure-check
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware default

    PhaseGrid grid;

    // kernel section
    double mu = 0.0;
    double b0 = 1.0;
    double cap = 0.0;  // 0 = uncapped
    double gamma = 1.0;
    double c_amp = 1.0;
    int images = 1;

    // discretization section
    std::string backend = "dvm";  // dvm | quadrature
    int sphere_nodes = 16;
    std::string dvm_table_path;  // optional cache

    SolverConfig solver;
    std::string stepper = "strang";

    GradStructure structure = GradStructure::quadratic;

    // scenario knobs
    double bump_speed = 0.7;
    double bump_temperature = 0.15;
    double relax_target_l1 = 0.0;  // stop early when below, 0 = never
    bool diag_degeneracy = false;  // add degeneracy norms to the diagnostics

    std::string out_dir = "out";

    CollisionKernel collision_kernel() const;
    SpatialKernel spatial_kernel() const;
    void apply_stepper_string();

    static RunConfig load(const std::string& path);
    static RunConfig defaults();
    void override_kv(const std::string& dotted_key, const std::string& value);
    std::string dump() const;  // effective config, re-parseable
};

}  // namespace fbz

#endif
