#include "fbz/variational.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbz/generic.hpp"

namespace fbz {

void Trajectory::validate() const {
    if (densities.size() != times.size() || times.empty())
        throw Error("Trajectory: node count mismatch");
    for (std::size_t n = 1; n < times.size(); ++n)
        if (!(times[n] > times[n - 1])) throw Error("Trajectory: times must increase");
    if (!fluxes.empty() && fluxes.size() != times.size() - 1)
        throw Error("Trajectory: need one flux per interval");
    if (!fluxes.empty() && mid_times.size() != fluxes.size())
        throw Error("Trajectory: midpoint time count mismatch");
    for (std::size_t n = 1; n < densities.size(); ++n)
        if (!(densities[n].grid() == densities[0].grid()))
            throw Error("Trajectory: densities live on different grids");
}

void Trajectory::save(const std::string& dir) const {
    validate();
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream man(dir + "/manifest.txt");
    if (!man) throw IoError("Trajectory::save: cannot open manifest in " + dir);
    man << "fbztraj 1\n";
    man << "nodes " << times.size() << "\n";
    man << "intervals " << fluxes.size() << "\n";
    man << "solver_produced " << (solver_produced ? 1 : 0) << "\n";
    char buf[160];
    for (std::size_t n = 0; n < times.size(); ++n) {
        std::snprintf(buf, sizeof buf, "node_%06zu.snap", n);
        save_snapshot_bin(densities[n], times[n], dir + "/" + buf);
        man << "node " << buf << "\n";
    }
    for (std::size_t n = 0; n < fluxes.size(); ++n) {
        if (fluxes[n].kind != CollisionFlux::Kind::scaled_true)
            throw IoError("Trajectory::save: only product-form fluxes are serializable");
        char name[64];
        std::snprintf(name, sizeof name, "mid_%06zu.snap", n);
        save_snapshot_bin(*fluxes[n].base, mid_times[n], dir + "/" + name);
        std::snprintf(buf, sizeof buf, "mid %s %.17g\n", name, fluxes[n].scale);
        man << buf;
    }
    if (!man) throw IoError("Trajectory::save: write failed in " + dir);
}

Trajectory Trajectory::load(const std::string& dir) {
    std::ifstream man(dir + "/manifest.txt");
    if (!man) throw IoError("Trajectory::load: cannot open manifest in " + dir);
    std::string line;
    std::getline(man, line);
    if (line != "fbztraj 1") throw IoError("Trajectory::load: bad manifest header");
    Trajectory t;
    std::size_t nodes = 0, intervals = 0;
    int produced = 0;
    man >> line >> nodes;
    man >> line >> intervals;
    man >> line >> produced;
    t.solver_produced = produced != 0;
    for (std::size_t n = 0; n < nodes; ++n) {
        std::string key, file;
        man >> key >> file;
        if (key != "node") throw IoError("Trajectory::load: manifest expects node rows");
        auto [dens, time] = load_snapshot(dir + "/" + file);
        t.densities.push_back(std::move(dens));
        t.times.push_back(time);
    }
    for (std::size_t n = 0; n < intervals; ++n) {
        std::string key, file;
        double scale;
        man >> key >> file >> scale;
        if (key != "mid") throw IoError("Trajectory::load: manifest expects mid rows");
        auto [dens, time] = load_snapshot(dir + "/" + file);
        CollisionFlux U;
        U.kind = CollisionFlux::Kind::scaled_true;
        U.base = std::make_shared<Density>(std::move(dens));
        U.scale = scale;
        t.fluxes.push_back(std::move(U));
        t.mid_times.push_back(time);
    }
    t.validate();
    return t;
}

std::vector<double> test_fn_one(const PhaseGrid& g) {
    return std::vector<double>(g.cells(), 1.0);
}

std::vector<double> test_fn_v1(const PhaseGrid& g) {
    std::vector<double> out(g.cells());
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    for (int j = 0; j < g.nv_nodes(); ++j) {
        double v1 = lat.velocity(j)[0];
        for (int i = 0; i < ncx; ++i) out[std::size_t(j) * ncx + i] = v1;
    }
    return out;
}

std::vector<double> test_fn_speed2(const PhaseGrid& g) {
    std::vector<double> out(g.cells());
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    for (int j = 0; j < g.nv_nodes(); ++j) {
        double v2 = norm2(lat.velocity(j));
        for (int i = 0; i < ncx; ++i) out[std::size_t(j) * ncx + i] = v2;
    }
    return out;
}

namespace {

// int v . grad_x(phi) dmu by the spectral x-derivative
double transport_term(const Density& f, const std::vector<double>& phi) {
    const PhaseGrid& g = f.grid();
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    Kahan s;
    for (int axis = 0; axis < g.d; ++axis) {
        std::vector<double> dphi = ddx_spectral(g, phi, axis);
        for (int j = 0; j < g.nv_nodes(); ++j) {
            double va = lat.velocity(j)[axis];
            if (va == 0.0) continue;
            const double* row = f.values().data() + std::size_t(j) * ncx;
            const double* dp = dphi.data() + std::size_t(j) * ncx;
            Kahan rs;
            for (int i = 0; i < ncx; ++i) rs.add(row[i] * dp[i]);
            s.add(va * rs.value());
        }
    }
    return s.value() * g.cell_volume();
}

Density interval_density(const Trajectory& traj, std::size_t n) {
    const CollisionFlux& U = traj.fluxes[n];
    if (U.kind == CollisionFlux::Kind::scaled_true) return *U.base;
    // loaded explicit fluxes: pair with the node average
    const Density& a = traj.densities[n];
    const Density& b = traj.densities[n + 1];
    std::vector<double> vals(a.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.5 * (a[i] + b[i]);
    return Density(a.grid(), std::move(vals));
}

}  // namespace

double tcre_residual(const TupleSpace& ts, const Trajectory& traj,
                     const std::vector<std::vector<double>>& extra_test_functions) {
    traj.validate();
    if (traj.fluxes.empty()) throw Error("tcre_residual: trajectory carries no fluxes");
    const PhaseGrid& g = traj.densities[0].grid();
    if (!(g == ts.grid())) throw Error("tcre_residual: tuple set grid mismatch");

    std::vector<std::vector<double>> phis = {test_fn_one(g), test_fn_v1(g), test_fn_speed2(g)};
    for (const auto& p : phis)
        if (p.size() != g.cells()) throw Error("tcre_residual: bad test function");
    for (const auto& p : extra_test_functions) {
        if (p.size() != g.cells()) throw Error("tcre_residual: bad test function");
        phis.push_back(p);
    }

    double worst = 0.0;
    for (std::size_t n = 0; n + 1 < traj.times.size(); ++n) {
        double dt = traj.times[n + 1] - traj.times[n];
        Density mid = interval_density(traj, n);
        for (const auto& phi : phis) {
            double lhs = inner(g, phi, traj.densities[n + 1].values()) -
                         inner(g, phi, traj.densities[n].values());
            double rhs = dt * (transport_term(mid, phi) + ts.pairing(phi, traj.fluxes[n]));
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

double chain_rule_defect(const TupleSpace& ts, const Trajectory& traj,
                         std::size_t* gate_violations) {
    traj.validate();
    if (traj.fluxes.empty()) throw Error("chain_rule_defect: trajectory carries no fluxes");
    double worst = 0.0;
    std::size_t viol = 0;
    for (std::size_t n = 0; n + 1 < traj.times.size(); ++n) {
        double dt = traj.times[n + 1] - traj.times[n];
        Density mid = interval_density(traj, n);
        std::size_t v = 0;
        double rate = ts.pairing_grad_log(mid, traj.fluxes[n], &v);
        viol += v;
        double dH = entropy(traj.densities[n + 1]) - entropy(traj.densities[n]);
        worst = std::max(worst, std::abs(dH - dt * rate));
    }
    if (gate_violations) *gate_violations = viol;
    return worst;
}

double entropy_identity_defect(const TupleSpace& ts, const Trajectory& traj) {
    traj.validate();
    const std::size_t N = traj.times.size();
    std::vector<double> D(N);
    for (std::size_t n = 0; n < N; ++n) D[n] = entropy_dissipation_D(ts, traj.densities[n]);
    double H0 = entropy(traj.densities[0]);
    double integral = 0.0, worst = 0.0;
    for (std::size_t n = 1; n < N; ++n) {
        integral += 0.5 * (D[n - 1] + D[n]) * (traj.times[n] - traj.times[n - 1]);
        worst = std::max(worst, std::abs(entropy(traj.densities[n]) - H0 + integral));
    }
    return worst;
}

AuditReport l_functional(const TupleSpace& ts, const Trajectory& traj, GradStructure st) {
    traj.validate();
    if (traj.fluxes.empty()) throw Error("l_functional: trajectory carries no fluxes");
    AuditReport r;

    const std::size_t N = traj.times.size();
    std::vector<double> dstar(N);
    std::size_t inf_total = 0;
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t inf_n = 0;
        dstar[n] = d_psi_star(ts, traj.densities[n], st, &inf_n);
        inf_total += inf_n;
    }
    for (std::size_t n = 1; n < N; ++n)
        r.int_d_psi_star += 0.5 * (dstar[n - 1] + dstar[n]) * (traj.times[n] - traj.times[n - 1]);

    Kahan rint, tv;
    for (std::size_t n = 0; n < traj.fluxes.size(); ++n) {
        double dt = traj.times[n + 1] - traj.times[n];
        Density mid = interval_density(traj, n);
        std::size_t inf_n = 0;
        rint.add(dt * big_R(ts, mid, traj.fluxes[n], st, &inf_n));
        inf_total += inf_n;
        tv.add(dt * ts.total_variation(traj.fluxes[n]));
    }
    r.int_big_R = rint.value();
    r.flux_total_variation = tv.value();
    r.infinite_tuples = inf_total;

    r.delta_H = entropy(traj.densities[N - 1]) - entropy(traj.densities[0]);
    r.l_value = r.delta_H + r.int_d_psi_star + r.int_big_R;

    r.tcre_residual_max = tcre_residual(ts, traj);
    r.chain_rule_defect = chain_rule_defect(ts, traj, &r.gate_violations);
    r.entropy_identity_defect = entropy_identity_defect(ts, traj);
    r.numerical_tolerance = double(traj.steps()) * r.chain_rule_defect + 1e-12;
    return r;
}

}  // namespace fbz
