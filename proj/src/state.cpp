#include "fbz/state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fbz {

void PhaseGrid::validate() const {
    if (d != 2 && d != 3) throw Error("PhaseGrid: dimension must be 2 or 3");
    if (!(torus_side > 0.0) || !(vmax > 0.0)) throw Error("PhaseGrid: sides must be positive");
    if (nx < 1 || nv < 2) throw Error("PhaseGrid: nx >= 1 and nv >= 2 required");
}

Vec PhaseGrid::x_center(int flat) const {
    int c[3] = {0, 0, 0};
    x_coords(flat, c);
    Vec x = {0, 0, 0};
    for (int a = 0; a < d; ++a) x[a] = -0.5 * torus_side + (c[a] + 0.5) * dx();
    return x;
}

void PhaseGrid::x_coords(int flat, int* out) const {
    for (int a = d - 1; a >= 0; --a) {
        out[a] = flat % nx;
        flat /= nx;
    }
}

int PhaseGrid::x_flat(const int* c) const {
    int f = 0;
    for (int a = 0; a < d; ++a) f = f * nx + c[a];
    return f;
}

Density::Density(PhaseGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.cells()) throw Error("Density: value count does not match grid");
    Kahan total;
    for (double v : values_) {
        if (!(v >= 0.0)) throw Error("Density: negative or NaN value");
        total.add(v);
    }
    double mass = total.value() * grid_.cell_volume();
    if (std::abs(mass - 1.0) > 1e-12)
        throw Error("Density: mass " + std::to_string(mass) + " is not 1 within 1e-12");
}

Density Density::normalized(PhaseGrid grid, std::vector<double> raw) {
    grid.validate();
    Kahan total;
    for (double v : raw) {
        if (!(v >= 0.0)) throw Error("Density::normalized: negative or NaN value");
        total.add(v);
    }
    double mass = total.value() * grid.cell_volume();
    if (!(mass > 0.0)) throw Error("Density::normalized: zero mass");
    for (double& v : raw) v /= mass;
    return Density(std::move(grid), std::move(raw));
}

double Density::mass() const {
    Kahan total;
    for (double v : values_) total.add(v);
    return total.value() * grid_.cell_volume();
}

bool Density::uniform_in_x() const {
    const int ncx = grid_.nx_cells();
    const int nnv = grid_.nv_nodes();
    for (int j = 0; j < nnv; ++j) {
        const double* row = values_.data() + std::size_t(j) * ncx;
        for (int i = 1; i < ncx; ++i)
            if (row[i] != row[0]) return false;
    }
    return true;
}

MomentReport moments(const Density& f, double p, double q) {
    const PhaseGrid& g = f.grid();
    const int ncx = g.nx_cells();
    const int nnv = g.nv_nodes();
    const double vol = g.cell_volume();
    VelocityLattice lat = g.lattice();

    Kahan mass, ke, epq, mom[3];
    // <x>^p part depends on x only; precompute its per-column sum of f
    std::vector<double> xmass(ncx, 0.0);
    for (int j = 0; j < nnv; ++j) {
        const double* row = f.values().data() + std::size_t(j) * ncx;
        Vec v = lat.velocity(j);
        double v2 = norm2(v);
        double vq = std::pow(std::sqrt(1.0 + v2), q);
        Kahan rs;
        for (int i = 0; i < ncx; ++i) {
            rs.add(row[i]);
            xmass[i] += row[i];
        }
        double rowmass = rs.value();
        mass.add(rowmass);
        ke.add(0.5 * v2 * rowmass);
        epq.add(vq * rowmass);
        for (int a = 0; a < g.d; ++a) mom[a].add(v[a] * rowmass);
    }
    for (int i = 0; i < ncx; ++i) {
        double x2 = norm2(g.x_center(i));
        epq.add(std::pow(std::sqrt(1.0 + x2), p) * xmass[i]);
    }
    MomentReport r;
    r.mass = mass.value() * vol;
    r.kinetic_energy = ke.value() * vol;
    r.e_pq = epq.value() * vol;
    for (int a = 0; a < 3; ++a) r.momentum[a] = mom[a].value() * vol;
    r.entropy = entropy(f);
    return r;
}

double entropy(const PhaseGrid& g, const std::vector<double>& values) {
    Kahan h;
    for (double v : values)
        if (v > 0.0) h.add(v * std::log(v));
    return h.value() * g.cell_volume();
}

double entropy(const Density& f) { return entropy(f.grid(), f.values()); }

double relative_entropy(const Density& f, const Density& g) {
    if (!(f.grid() == g.grid())) throw Error("relative_entropy: grids differ");
    Kahan h;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double a = f[i], b = g[i];
        if (a > 0.0) {
            if (!(b > 0.0))
                throw Error("relative_entropy: support violation (f > 0 where g = 0)");
            h.add(a * std::log(a / b));
        }
    }
    return h.value() * f.grid().cell_volume();
}

namespace {

double gaussian_tail_outside_box(const PhaseGrid& g, const Vec& u, double T) {
    // product of per-axis interior masses; tail = 1 - product
    double inside = 1.0;
    double s = std::sqrt(2.0 * T);
    for (int a = 0; a < g.d; ++a) {
        double lo = (-g.vmax - u[a]) / s;
        double hi = (g.vmax - u[a]) / s;
        inside *= 0.5 * (std::erf(hi) - std::erf(lo));
    }
    return 1.0 - inside;
}

}  // namespace

Density maxwellian(const PhaseGrid& grid, const Vec& u, double temperature) {
    grid.validate();
    if (!(temperature > 0.0)) throw Error("maxwellian: temperature must be positive");
    double tail = gaussian_tail_outside_box(grid, u, temperature);
    if (tail > 1e-8) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "maxwellian: velocity box truncates %.3g of the Gaussian mass (limit 1e-8)",
                      tail);
        throw Error(msg);
    }
    const int ncx = grid.nx_cells();
    const int nnv = grid.nv_nodes();
    VelocityLattice lat = grid.lattice();
    std::vector<double> vals(grid.cells());
    for (int j = 0; j < nnv; ++j) {
        Vec v = lat.velocity(j);
        double w = std::exp(-norm2(v - u) / (2.0 * temperature));
        double* row = vals.data() + std::size_t(j) * ncx;
        for (int i = 0; i < ncx; ++i) row[i] = w;
    }
    return Density::normalized(grid, std::move(vals));
}

Density maxwellian_matching(const PhaseGrid& grid, double mass, const Vec& momentum,
                            double kinetic_energy) {
    grid.validate();
    if (!(mass > 0.0)) throw Error("maxwellian_matching: mass must be positive");
    const int d = grid.d;
    VelocityLattice lat = grid.lattice();
    const int nnv = grid.nv_nodes();

    // target lattice means
    Vec mu_target = (1.0 / mass) * momentum;
    double e_target = 2.0 * kinetic_energy / mass;  // sum |v|^2 weight

    Vec u = mu_target;
    double T = std::max(1e-6, (e_target - norm2(mu_target)) / d);

    std::vector<Vec> vs(nnv);
    for (int j = 0; j < nnv; ++j) vs[j] = lat.velocity(j);

    for (int it = 0; it < 100; ++it) {
        // lattice Gaussian moments and score covariances
        double Z = 0.0, m2 = 0.0;
        Vec m1 = {0, 0, 0};
        // scores: su_a = (v_a - u_a)/T, sT = |v-u|^2/(2T^2)
        double c_e_T = 0.0, c_e_u[3] = {0, 0, 0}, c_u_T[3] = {0, 0, 0};
        double c_u_u[3][3] = {};
        double mean_sT = 0.0, mean_su[3] = {0, 0, 0};
        std::vector<double> w(nnv);
        for (int j = 0; j < nnv; ++j) {
            double r2 = norm2(vs[j] - u);
            w[j] = std::exp(-r2 / (2.0 * T));
            Z += w[j];
        }
        for (int j = 0; j < nnv; ++j) {
            double p = w[j] / Z;
            double v2 = norm2(vs[j]);
            m2 += p * v2;
            double sT = norm2(vs[j] - u) / (2.0 * T * T);
            mean_sT += p * sT;
            for (int a = 0; a < d; ++a) {
                double su = (vs[j][a] - u[a]) / T;
                m1[a] += p * vs[j][a];
                mean_su[a] += p * su;
                c_e_u[a] += p * v2 * su;
                c_u_T[a] += p * vs[j][a] * sT;
                for (int b = 0; b < d; ++b) c_u_u[a][b] += p * vs[j][a] * (vs[j][b] - u[b]) / T;
            }
            c_e_T += p * v2 * sT;
        }
        // residuals
        double re = m2 - e_target;
        Vec ru = m1 - mu_target;
        double rn = std::abs(re);
        for (int a = 0; a < d; ++a) rn = std::max(rn, std::abs(ru[a]));
        if (rn < 1e-14 * std::max(1.0, e_target)) break;

        // Jacobian of (m1, m2) w.r.t. (u, T) via score covariances
        double J[4][4] = {};
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) J[a][b] = c_u_u[a][b] - m1[a] * mean_su[b];
            J[a][d] = c_u_T[a] - m1[a] * mean_sT;
        }
        for (int b = 0; b < d; ++b) J[d][b] = c_e_u[b] - m2 * mean_su[b];
        J[d][d] = c_e_T - m2 * mean_sT;

        // solve (d+1)x(d+1) by Gaussian elimination
        int n = d + 1;
        double rhs[4] = {ru[0], ru[1], 0, 0};
        rhs[d] = re;
        if (d == 3) rhs[2] = ru[2];
        for (int col = 0; col < n; ++col) {
            int piv = col;
            for (int r2i = col + 1; r2i < n; ++r2i)
                if (std::abs(J[r2i][col]) > std::abs(J[piv][col])) piv = r2i;
            std::swap(J[col], J[piv]);
            std::swap(rhs[col], rhs[piv]);
            if (std::abs(J[col][col]) < 1e-300)
                throw Error("maxwellian_matching: singular moment Jacobian");
            for (int r2i = col + 1; r2i < n; ++r2i) {
                double fct = J[r2i][col] / J[col][col];
                for (int cc = col; cc < n; ++cc) J[r2i][cc] -= fct * J[col][cc];
                rhs[r2i] -= fct * rhs[col];
            }
        }
        double delta[4] = {0, 0, 0, 0};
        for (int r2i = n - 1; r2i >= 0; --r2i) {
            double s = rhs[r2i];
            for (int cc = r2i + 1; cc < n; ++cc) s -= J[r2i][cc] * delta[cc];
            delta[r2i] = s / J[r2i][r2i];
        }
        for (int a = 0; a < d; ++a) u[a] -= delta[a];
        T -= delta[d];
        if (!(T > 1e-9)) T = 1e-9;
    }

    const int ncx = grid.nx_cells();
    std::vector<double> vals(grid.cells());
    for (int j = 0; j < nnv; ++j) {
        double wv = std::exp(-norm2(vs[j] - u) / (2.0 * T));
        double* row = vals.data() + std::size_t(j) * ncx;
        for (int i = 0; i < ncx; ++i) row[i] = wv;
    }
    // normalized() brings the state to unit mass; rescale to the target mass
    if (std::abs(mass - 1.0) > 1e-13)
        throw Error("maxwellian_matching: only unit-mass targets are supported");
    return Density::normalized(grid, std::move(vals));
}

void save_snapshot_csv(const Density& f, double time, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_snapshot_csv: cannot open " + path);
    const PhaseGrid& g = f.grid();
    char buf[256];
    out << "fbzsnap,1\n";
    std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g,%d,%.17g\n", g.d, g.torus_side, g.nx, g.vmax,
                  g.nv, time);
    out << buf;
    for (double v : f.values()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    if (!out) throw IoError("save_snapshot_csv: write failed for " + path);
}

void save_snapshot_bin(const Density& f, double time, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_snapshot_bin: cannot open " + path);
    const PhaseGrid& g = f.grid();
    out.write("FBZSNAP1", 8);
    double hdr[6] = {double(g.d), g.torus_side, double(g.nx), g.vmax, double(g.nv), time};
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    out.write(reinterpret_cast<const char*>(f.values().data()),
              std::streamsize(f.size() * sizeof(double)));
    if (!out) throw IoError("save_snapshot_bin: write failed for " + path);
}

std::pair<Density, double> load_snapshot(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("load_snapshot: cannot open " + path);
    char magic[8] = {};
    probe.read(magic, 8);
    if (std::memcmp(magic, "FBZSNAP1", 8) == 0) {
        double hdr[6];
        probe.read(reinterpret_cast<char*>(hdr), sizeof hdr);
        PhaseGrid g;
        g.d = int(hdr[0]);
        g.torus_side = hdr[1];
        g.nx = int(hdr[2]);
        g.vmax = hdr[3];
        g.nv = int(hdr[4]);
        g.validate();
        std::vector<double> vals(g.cells());
        probe.read(reinterpret_cast<char*>(vals.data()), std::streamsize(vals.size() * sizeof(double)));
        if (!probe) throw IoError("load_snapshot: truncated binary snapshot " + path);
        return {Density(g, std::move(vals)), hdr[5]};
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    if (line != "fbzsnap,1") throw IoError("load_snapshot: unrecognized format in " + path);
    std::getline(in, line);
    PhaseGrid g;
    double time = 0.0;
    {
        std::istringstream ss(line);
        char comma;
        ss >> g.d >> comma >> g.torus_side >> comma >> g.nx >> comma >> g.vmax >> comma >> g.nv >>
            comma >> time;
        if (!ss) throw IoError("load_snapshot: bad header in " + path);
    }
    g.validate();
    std::vector<double> vals;
    vals.reserve(g.cells());
    double v;
    while (in >> v) vals.push_back(v);
    if (vals.size() != g.cells()) throw IoError("load_snapshot: value count mismatch in " + path);
    return {Density(g, std::move(vals)), time};
}

}  // namespace fbz
