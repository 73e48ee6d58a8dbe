#include "fbz/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fbz {

CollisionKernel RunConfig::collision_kernel() const {
    CollisionKernel k;
    k.mu = mu;
    k.b0 = b0;
    k.cap = cap;
    return k;
}

SpatialKernel RunConfig::spatial_kernel() const {
    SpatialKernel k;
    k.gamma = gamma;
    k.c = c_amp;
    k.periodization_images = images;
    return k;
}

void RunConfig::apply_stepper_string() {
    if (stepper == "strang")
        solver.stepper = SolverConfig::Stepper::strang;
    else if (stepper == "euler")
        solver.stepper = SolverConfig::Stepper::euler;
    else if (stepper == "duhamel")
        solver.stepper = SolverConfig::Stepper::duhamel;
    else
        throw ConfigError("unknown stepper '" + stepper + "'");
}

RunConfig RunConfig::defaults() { return RunConfig{}; }

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

double parse_num(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (...) {
        throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
    return out;
}

}  // namespace

void RunConfig::override_kv(const std::string& dotted_key, const std::string& value) {
    const std::string& k = dotted_key;
    auto num = [&] { return parse_num(value, k); };
    auto integer = [&] { return int(parse_num(value, k)); };

    if (k == "scenario.name") scenario = value;
    else if (k == "scenario.seed") seed = std::uint64_t(parse_num(value, k));
    else if (k == "scenario.bump_speed") bump_speed = num();
    else if (k == "scenario.bump_temperature") bump_temperature = num();
    else if (k == "scenario.relax_target_l1") relax_target_l1 = num();
    else if (k == "scenario.diag_degeneracy") diag_degeneracy = parse_bool(value, k);
    else if (k == "grid.d") grid.d = integer();
    else if (k == "grid.torus_side") grid.torus_side = num();
    else if (k == "grid.nx") grid.nx = integer();
    else if (k == "grid.vmax") grid.vmax = num();
    else if (k == "grid.nv") grid.nv = integer();
    else if (k == "kernel.mu") mu = num();
    else if (k == "kernel.b0") b0 = num();
    else if (k == "kernel.cap") cap = num();
    else if (k == "kernel.gamma") gamma = num();
    else if (k == "kernel.c") c_amp = num();
    else if (k == "kernel.images") images = integer();
    else if (k == "discretization.backend") {
        if (value != "dvm" && value != "quadrature")
            throw ConfigError("discretization.backend must be dvm or quadrature");
        backend = value;
    } else if (k == "discretization.sphere_nodes") sphere_nodes = integer();
    else if (k == "discretization.dvm_table") dvm_table_path = value;
    else if (k == "solver.dt") solver.dt = num();
    else if (k == "solver.t_end") solver.t_end = num();
    else if (k == "solver.stepper") { stepper = value; apply_stepper_string(); }
    else if (k == "solver.record_flux") solver.record_flux = parse_bool(value, k);
    else if (k == "solver.positivity_guard") solver.positivity_guard = parse_bool(value, k);
    else if (k == "solver.checkpoint_every") solver.checkpoint_every = integer();
    else if (k == "solver.workers") workers = integer();
    else if (k == "dissipation.structure") {
        if (value == "quadratic") structure = GradStructure::quadratic;
        else if (value == "cosh") structure = GradStructure::cosh;
        else throw ConfigError("dissipation.structure must be quadratic or cosh");
    } else if (k == "output.dir") out_dir = value;
    else throw ConfigError("unknown configuration key '" + k + "'");
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    RunConfig cfg = defaults();
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto ltrim = line.find_first_not_of(" \t\r");
        if (ltrim == std::string::npos) continue;
        auto rtrim = line.find_last_not_of(" \t\r");
        line = line.substr(ltrim, rtrim - ltrim + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        key = strip(key);
        value = strip(value);
        if (section.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside a section");
        try {
            cfg.override_kv(section + "." + key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.grid.validate();
    return cfg;
}

std::string RunConfig::dump() const {
    char buf[512];
    std::ostringstream out;
    out << "[scenario]\n";
    std::snprintf(buf, sizeof buf,
                  "name = %s\nseed = %llu\nbump_speed = %.17g\nbump_temperature = %.17g\n"
                  "relax_target_l1 = %.17g\ndiag_degeneracy = %s\n",
                  scenario.c_str(), (unsigned long long)seed, bump_speed, bump_temperature,
                  relax_target_l1, diag_degeneracy ? "true" : "false");
    out << buf;
    out << "[grid]\n";
    std::snprintf(buf, sizeof buf, "d = %d\ntorus_side = %.17g\nnx = %d\nvmax = %.17g\nnv = %d\n",
                  grid.d, grid.torus_side, grid.nx, grid.vmax, grid.nv);
    out << buf;
    out << "[kernel]\n";
    std::snprintf(buf, sizeof buf,
                  "mu = %.17g\nb0 = %.17g\ncap = %.17g\ngamma = %.17g\nc = %.17g\nimages = %d\n",
                  mu, b0, cap, gamma, c_amp, images);
    out << buf;
    out << "[discretization]\n";
    out << "backend = " << backend << "\n";
    std::snprintf(buf, sizeof buf, "sphere_nodes = %d\n", sphere_nodes);
    out << buf;
    if (!dvm_table_path.empty()) out << "dvm_table = " << dvm_table_path << "\n";
    out << "[solver]\n";
    std::snprintf(buf, sizeof buf,
                  "dt = %.17g\nt_end = %.17g\nstepper = %s\nrecord_flux = %s\n"
                  "positivity_guard = %s\ncheckpoint_every = %d\nworkers = %d\n",
                  solver.dt, solver.t_end, stepper.c_str(), solver.record_flux ? "true" : "false",
                  solver.positivity_guard ? "true" : "false", solver.checkpoint_every, workers);
    out << buf;
    out << "[dissipation]\n";
    out << "structure = " << (structure == GradStructure::quadratic ? "quadratic" : "cosh")
        << "\n";
    out << "[output]\n";
    out << "dir = " << out_dir << "\n";
    return out.str();
}

}  // namespace fbz
