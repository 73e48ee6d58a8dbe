#include "fbz/scenarios.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fbz/diagnostics.hpp"
#include "fbz/generic.hpp"
#include "fbz/parallel.hpp"
#include "fbz/variational.hpp"

namespace fbz {

namespace fs = std::filesystem;

TupleSpace build_tuple_space(const RunConfig& cfg) {
    if (cfg.backend == "quadrature") {
        return TupleSpace::make_quadrature(cfg.grid, cfg.spatial_kernel(), cfg.collision_kernel(),
                                           sphere_quadrature(cfg.grid.d, cfg.sphere_nodes));
    }
    VelocityLattice lat = cfg.grid.lattice();
    if (!cfg.dvm_table_path.empty() && fs::exists(cfg.dvm_table_path)) {
        DVMTable t = load_dvm_table(cfg.dvm_table_path);
        return TupleSpace::make_dvm(cfg.grid, cfg.spatial_kernel(), std::move(t));
    }
    DVMTable t = build_dvm_table(lat, cfg.collision_kernel(), cfg.sphere_nodes);
    if (!cfg.dvm_table_path.empty()) save_dvm_table(t, cfg.dvm_table_path);
    return TupleSpace::make_dvm(cfg.grid, cfg.spatial_kernel(), std::move(t));
}

Density two_bump_state(const PhaseGrid& g, double speed, double temperature) {
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    Vec u = {speed, 0.0, 0.0};
    std::vector<double> vals(g.cells());
    for (int j = 0; j < g.nv_nodes(); ++j) {
        Vec v = lat.velocity(j);
        double w = 0.5 * std::exp(-norm2(v - u) / (2.0 * temperature)) +
                   0.5 * std::exp(-norm2(v + u) / (2.0 * temperature));
        double* row = vals.data() + std::size_t(j) * ncx;
        for (int i = 0; i < ncx; ++i) row[i] = w;
    }
    return Density::normalized(g, std::move(vals));
}

namespace {

struct OutputDir {
    std::string dir;
    explicit OutputDir(const RunConfig& cfg) : dir(cfg.out_dir) {
        fs::create_directories(dir);
        std::ofstream eff(dir + "/config.effective");
        eff << cfg.dump();
    }
};

void apply_workers(const RunConfig& cfg) {
    set_worker_count(cfg.workers);
}

}  // namespace

int scenario_relax(const RunConfig& cfg) {
    apply_workers(cfg);
    OutputDir out(cfg);
    TupleSpace ts = build_tuple_space(cfg);
    Density f0 = two_bump_state(cfg.grid, cfg.bump_speed, cfg.bump_temperature);

    MomentReport m0 = moments(f0, 2.0, 2.0);
    Density target = maxwellian_matching(cfg.grid, m0.mass, m0.momentum, m0.kinetic_energy);
    const double qplus = 2.0 + std::max(cfg.mu, 0.0);
    const double mom_scale = std::sqrt(2.0 * m0.kinetic_energy * m0.mass);

    std::ofstream diag(out.dir + "/diagnostics.txt");
    double prevH = m0.entropy;
    double prev_rel = relative_entropy(f0, target);
    int status = status_ok;
    std::string why;

    auto on_step = [&](const StepSample& s) {
        MomentReport m = moments(*s.density, 2.0, qplus);
        DiagRecord r;
        r.step = s.step;
        r.t = s.t;
        r.d = cfg.grid.d;
        r.mass = m.mass;
        for (int a = 0; a < 3; ++a) r.mom[a] = m.momentum[a];
        r.energy = m.kinetic_energy;
        r.H = m.entropy;
        r.D = entropy_dissipation_D(ts, *s.density);
        r.d_psi_star = d_psi_star(ts, *s.density, cfg.structure);
        r.e22 = moments(*s.density, 2.0, 2.0).e_pq;
        r.e0q = m.e_pq;
        if (s.midpoint)
            r.big_R = big_R(ts, *s.midpoint, ts.true_flux(*s.midpoint), cfg.structure);
        if (cfg.diag_degeneracy) {
            DegeneracyReport dr = degeneracy_report(ts, *s.density);
            r.norm_L_dS = dr.norm_L_dS;
            r.norm_M_dE = dr.norm_M_dE;
        }
        diag << format_record(r);
        if (cfg.solver.checkpoint_every > 0 && s.step % cfg.solver.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "snap_%06d.csv", s.step);
            save_snapshot_csv(*s.density, s.t, out.dir + "/" + name);
        }

        if (status != status_ok) return;
        if (std::abs(m.mass - m0.mass) > 1e-12 * m0.mass) {
            status = status_conservation;
            why = "mass drift at step " + std::to_string(s.step);
            return;
        }
        double md = 0.0;
        for (int a = 0; a < cfg.grid.d; ++a) md = std::max(md, std::abs(m.momentum[a] - m0.momentum[a]));
        if (md > 1e-10 * mom_scale) {
            status = status_conservation;
            why = "momentum drift at step " + std::to_string(s.step);
            return;
        }
        if (std::abs(m.kinetic_energy - m0.kinetic_energy) > 1e-10 * m0.kinetic_energy) {
            status = status_conservation;
            why = "energy drift at step " + std::to_string(s.step);
            return;
        }
        if (s.step > 0 && m.entropy > prevH + 1e-10) {
            status = status_entropy_monotone;
            why = "entropy increase at step " + std::to_string(s.step);
            return;
        }
        prevH = m.entropy;
        double rel = relative_entropy(*s.density, target);
        if (s.step > 0 && rel > prev_rel + 1e-10) {
            status = status_entropy_monotone;
            why = "relative entropy increase at step " + std::to_string(s.step);
            return;
        }
        prev_rel = rel;
    };

    Trajectory traj = run(ts, f0, cfg.solver, on_step);

    if (status == status_ok && cfg.relax_target_l1 > 0.0) {
        Kahan l1;
        const Density& fT = traj.densities.back();
        for (std::size_t i = 0; i < fT.size(); ++i) l1.add(std::abs(fT[i] - target[i]));
        double dist = l1.value() * cfg.grid.cell_volume();
        if (dist > cfg.relax_target_l1) {
            status = status_relax_target;
            why = "final L1 distance " + std::to_string(dist) + " above target";
        }
    }

    std::ofstream rep(out.dir + "/report.txt");
    rep << "scenario relax\n"
        << "status " << status << "\n"
        << (why.empty() ? "" : "reason " + why + "\n");
    return status;
}

int scenario_variational_audit(const RunConfig& cfg) {
    apply_workers(cfg);
    OutputDir out(cfg);
    TupleSpace ts = build_tuple_space(cfg);
    Density f0 = two_bump_state(cfg.grid, cfg.bump_speed, cfg.bump_temperature);

    SolverConfig scfg = cfg.solver;
    scfg.record_flux = true;
    std::ofstream diag(out.dir + "/diagnostics.txt");
    const double qplus = 2.0 + std::max(cfg.mu, 0.0);
    Trajectory traj = run(ts, f0, scfg, [&](const StepSample& s) {
        MomentReport m = moments(*s.density, 2.0, qplus);
        DiagRecord r;
        r.step = s.step;
        r.t = s.t;
        r.d = cfg.grid.d;
        r.mass = m.mass;
        for (int a = 0; a < 3; ++a) r.mom[a] = m.momentum[a];
        r.energy = m.kinetic_energy;
        r.H = m.entropy;
        r.D = entropy_dissipation_D(ts, *s.density);
        r.d_psi_star = d_psi_star(ts, *s.density, cfg.structure);
        if (s.midpoint) r.big_R = big_R(ts, *s.midpoint, ts.true_flux(*s.midpoint), cfg.structure);
        r.e22 = moments(*s.density, 2.0, 2.0).e_pq;
        r.e0q = m.e_pq;
        diag << format_record(r);
    });

    AuditReport true_rep = l_functional(ts, traj, cfg.structure);

    const double factors[] = {0.5, 0.9, 1.1, 2.0};
    double l_perturbed[4];
    for (int i = 0; i < 4; ++i) {
        Trajectory pert = traj;
        for (auto& U : pert.fluxes) U = TupleSpace::scale_flux(U, factors[i]);
        AuditReport r = l_functional(ts, pert, cfg.structure);
        l_perturbed[i] = r.l_value;
    }

    std::ofstream rep(out.dir + "/audit_report.txt");
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "L_T %.17g\ndelta_H %.17g\nint_D_psi_star %.17g\nint_R %.17g\n"
                  "tcre_residual_max %.17g\nchain_rule_defect %.17g\n"
                  "entropy_identity_defect %.17g\nflux_total_variation %.17g\n"
                  "numerical_tolerance %.17g\n",
                  true_rep.l_value, true_rep.delta_H, true_rep.int_d_psi_star, true_rep.int_big_R,
                  true_rep.tcre_residual_max, true_rep.chain_rule_defect,
                  true_rep.entropy_identity_defect, true_rep.flux_total_variation,
                  true_rep.numerical_tolerance);
    rep << buf;
    // the audit summary also lands in the diagnostics stream as one record
    char audit_line[512];
    std::snprintf(audit_line, sizeof audit_line,
                  "audit=1 L_T=%.17g delta_H=%.17g int_Dpsi=%.17g int_R=%.17g tol=%.17g\n",
                  true_rep.l_value, true_rep.delta_H, true_rep.int_d_psi_star, true_rep.int_big_R,
                  true_rep.numerical_tolerance);
    std::ofstream(out.dir + "/audit_record.txt") << audit_line;
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof buf, "L_T_scaled_%g %.17g\n", factors[i], l_perturbed[i]);
        rep << buf;
    }

    if (!(std::abs(true_rep.l_value) < 1e-3) || true_rep.l_value < -true_rep.numerical_tolerance)
        return status_action_value;
    // factor 1.1 is the canonical gap probe
    if (!(l_perturbed[2] >= 10.0 * std::max(true_rep.l_value, 1e-12)))
        return status_perturbation_gap;
    return status_ok;
}

int scenario_structure_check(const RunConfig& cfg) {
    apply_workers(cfg);
    OutputDir out(cfg);
    TupleSpace ts = build_tuple_space(cfg);
    std::ofstream rep(out.dir + "/structure_report.txt");
    Rng rng(cfg.seed);
    int status = status_ok;
    auto fail = [&](int code, const std::string& msg) {
        if (status == status_ok) status = code;
        rep << "FAIL " << msg << "\n";
    };

    // degeneracies and entropy production on random positive states
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> vals(cfg.grid.cells());
        const int ncx = cfg.grid.nx_cells();
        for (int j = 0; j < cfg.grid.nv_nodes(); ++j) {
            double w = 0.1 + rng.next_double();
            for (int i = 0; i < ncx; ++i) vals[std::size_t(j) * ncx + i] = w;
        }
        Density f = Density::normalized(cfg.grid, std::move(vals));
        DegeneracyReport dr = degeneracy_report(ts, f);
        rep << "degeneracy trial " << trial << " L_dS " << dr.norm_L_dS << " M_dE " << dr.norm_M_dE
            << "\n";
        if (ts.backend() == TupleSpace::Backend::dvm && dr.norm_M_dE > 1e-12)
            fail(status_degeneracy, "M dE above 1e-12");
        double prod = entropy_production(ts, f);
        double D = entropy_dissipation_D(ts, f);
        if (std::abs(prod - D) > 1e-10 * std::max(1.0, std::abs(D)))
            fail(status_forms, "entropy production does not match the dissipation");
        std::size_t inf_n = 0;
        double dquad = d_psi_star(ts, f, GradStructure::quadratic, &inf_n);
        if (inf_n || std::abs(dquad - 0.5 * D) > 1e-12 * std::max(1.0, std::abs(D)))
            fail(status_identities, "quadratic dual potential is not half the dissipation");
    }

    // closed-form identities on a log-spaced grid
    for (int a = 0; a < 50 && status == status_ok; ++a) {
        for (int b = 0; b < 50; ++b) {
            double s = std::pow(10.0, -6.0 + 12.0 * a / 49.0);
            double t = std::pow(10.0, -6.0 + 12.0 * b / 49.0);
            double lhs = g_psi_star(GradStructure::cosh, s, t);
            double ref = 0.5 * (std::sqrt(s) - std::sqrt(t)) * (std::sqrt(s) - std::sqrt(t));
            if (std::abs(lhs - ref) > 1e-12 * std::max(1.0, ref)) {
                fail(status_identities, "cosh closed form");
                break;
            }
            for (GradStructure st : {GradStructure::quadratic, GradStructure::cosh}) {
                double th = theta_mean(st, s, t);
                double comp = psi_pair_eval(st, std::log(s) - std::log(t)).psi_star_prime * th;
                if (std::abs(comp - (s - t)) > 1e-12 * std::max({1.0, s, t})) {
                    fail(status_identities, "compatibility identity");
                    break;
                }
            }
        }
    }

    // Maxwellian row: both degeneracy norms small at equilibrium; the
    // temperature keeps the box truncation below the constructor gate
    Density M = maxwellian(cfg.grid, {0, 0, 0}, cfg.grid.vmax * cfg.grid.vmax / 40.0);
    DegeneracyReport dm = degeneracy_report(ts, M);
    rep << "maxwellian L_dS " << dm.norm_L_dS << " M_dE " << dm.norm_M_dE << "\n";
    if (dm.norm_L_dS > 1e-10 || dm.norm_M_dE > 1e-10)
        fail(status_degeneracy, "equilibrium degeneracy norms");

    rep << "status " << status << "\n";
    return status;
}

int run_scenario(const RunConfig& cfg) {
    if (cfg.scenario == "relax") return scenario_relax(cfg);
    if (cfg.scenario == "audit") return scenario_variational_audit(cfg);
    if (cfg.scenario == "structure-check") return scenario_structure_check(cfg);
    throw ConfigError("unknown scenario '" + cfg.scenario + "'");
}

}  // namespace fbz
