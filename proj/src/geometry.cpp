#include "fbz/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fbz {

std::pair<Vec, Vec> collide(const Vec& v, const Vec& v_star, const Vec& omega, int d) {
    if (std::abs(norm(omega) - 1.0) > 1e-12) throw Error("collide: omega is not a unit vector");
    (void)d;
    double h = dot(v - v_star, omega);
    return {v - h * omega, v_star + h * omega};
}

namespace {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = xi;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
            double dx = p1 / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        x[i] = xi;
        w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
}

}  // namespace

SphereQuadrature sphere_quadrature(int d, int n) {
    if (n < 4) throw Error("sphere_quadrature: need at least 4 nodes");
    SphereQuadrature q;
    q.d = d;
    if (d == 2) {
        q.nodes.reserve(n);
        q.weights.assign(n, 2.0 * M_PI / n);
        for (int m = 0; m < n; ++m) {
            double th = 2.0 * M_PI * m / n;
            q.nodes.push_back(vec2(std::cos(th), std::sin(th)));
        }
        return q;
    }
    if (d == 3) {
        int npol = std::max(2, (int)std::lround(std::sqrt(n / 2.0)));
        int naz = 2 * npol;  // even azimuth count keeps the set antipodal
        std::vector<double> gx, gw;
        gauss_legendre(npol, gx, gw);
        for (int i = 0; i < npol; ++i) {
            double ct = gx[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int m = 0; m < naz; ++m) {
                double ph = 2.0 * M_PI * m / naz;
                q.nodes.push_back(vec3(st * std::cos(ph), st * std::sin(ph), ct));
                q.weights.push_back(gw[i] * 2.0 * M_PI / naz);
            }
        }
        return q;
    }
    throw Error("sphere_quadrature: unsupported dimension");
}

Vec VelocityLattice::velocity(int flat) const {
    int c[3] = {0, 0, 0};
    coords(flat, c);
    Vec v = {0, 0, 0};
    double h = dv();
    for (int a = 0; a < d; ++a) v[a] = -vmax + (c[a] + 0.5) * h;
    return v;
}

void VelocityLattice::coords(int flat, int* out) const {
    for (int a = d - 1; a >= 0; --a) {
        out[a] = flat % nv;
        flat /= nv;
    }
}

int VelocityLattice::flat(const int* c) const {
    int f = 0;
    for (int a = 0; a < d; ++a) f = f * nv + c[a];
    return f;
}

namespace {

struct PairKey {
    int p[3];  // momentum sum, integer lattice coords
    int e;     // |j|^2 + |l|^2 in lattice units
    bool operator<(const PairKey& o) const {
        for (int a = 0; a < 3; ++a)
            if (p[a] != o.p[a]) return p[a] < o.p[a];
        return e < o.e;
    }
};

}  // namespace

DVMTable build_dvm_table(const VelocityLattice& lat, const CollisionKernel& kernel,
                         int calib_sphere_n) {
    const int d = lat.d, nv = lat.nv;
    const int nn = lat.nodes();

    // group ordered pairs by the conserved (momentum, energy) shell
    std::map<PairKey, std::vector<std::pair<int, int>>> shells;
    {
        std::vector<std::array<int, 3>> cr(nn);
        for (int f = 0; f < nn; ++f) {
            int c[3] = {0, 0, 0};
            lat.coords(f, c);
            cr[f] = {c[0], c[1], c[2]};
        }
        for (int j = 0; j < nn; ++j) {
            for (int l = 0; l < nn; ++l) {
                PairKey k{{0, 0, 0}, 0};
                for (int a = 0; a < d; ++a) k.p[a] = cr[j][a] + cr[l][a];
                int e = 0;
                for (int a = 0; a < d; ++a)
                    e += cr[j][a] * cr[j][a] + cr[l][a] * cr[l][a];
                k.e = e;
                shells[k].emplace_back(j, l);
            }
        }
    }
    (void)nv;

    DVMTable t;
    t.lattice = lat;
    t.mu = kernel.mu;
    t.b0 = kernel.b0;
    t.cap = kernel.cap;
    t.calib_sphere_n = calib_sphere_n;

    const double surface = (d == 2) ? 2.0 * M_PI : 4.0 * M_PI;
    for (const auto& [key, members] : shells) {
        const std::size_t m = members.size();
        if (m < 2) continue;
        const double share = surface / static_cast<double>(m - 1);
        for (const auto& [j, l] : members) {
            Vec vj = lat.velocity(j), vl = lat.velocity(l);
            for (const auto& [jp, lp] : members) {
                if (jp == j && lp == l) continue;
                // scattering direction realising this transition
                Vec dvp = vj - lat.velocity(jp);
                double dn = norm(dvp);
                Vec omega = (1.0 / dn) * dvp;
                double B = eval_B(kernel, vj - vl, omega, d);
                t.quads.push_back({(std::uint32_t)j, (std::uint32_t)l, (std::uint32_t)jp,
                                   (std::uint32_t)lp});
                t.raw_weight.push_back(B * share);
            }
        }
    }
    if (t.quads.empty()) throw Error("build_dvm_table: no conserving quadruple fits this lattice");

    // Calibrate the overall normalisation so the total loss rate of the
    // lattice standard Gaussian matches the sphere-quadrature backend.
    std::vector<double> g(nn);
    {
        double z = 0.0;
        for (int f = 0; f < nn; ++f) {
            g[f] = std::exp(-0.5 * norm2(lat.velocity(f)));
            z += g[f];
        }
        for (int f = 0; f < nn; ++f) g[f] /= z;
    }
    double loss_dvm = 0.0;
    for (std::size_t q = 0; q < t.quads.size(); ++q)
        loss_dvm += t.raw_weight[q] * g[t.quads[q].j] * g[t.quads[q].l];
    SphereQuadrature sq = sphere_quadrature(d, calib_sphere_n);
    double loss_quad = 0.0;
    for (int j = 0; j < nn; ++j) {
        Vec vj = lat.velocity(j);
        for (int l = 0; l < nn; ++l) {
            Vec rel = vj - lat.velocity(l);
            double bsum = 0.0;
            for (std::size_t m = 0; m < sq.nodes.size(); ++m)
                bsum += sq.weights[m] * eval_B(kernel, rel, sq.nodes[m], d);
            loss_quad += bsum * g[j] * g[l];
        }
    }
    t.kappa = loss_dvm > 0.0 ? loss_quad / loss_dvm : 1.0;
    t.weight.resize(t.raw_weight.size());
    for (std::size_t q = 0; q < t.raw_weight.size(); ++q) t.weight[q] = t.kappa * t.raw_weight[q];
    return t;
}

void save_dvm_table(const DVMTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_dvm_table: cannot open " + path);
    out << "# fuzzybz dvm table v1\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "d %d\nnv %d\nvmax %.17g\nmu %.17g\nb0 %.17g\ncap %.17g\n",
                  t.lattice.d, t.lattice.nv, t.lattice.vmax, t.mu, t.b0, t.cap);
    out << buf;
    std::snprintf(buf, sizeof buf, "calib_sphere %d\nkappa %.17g\ncount %zu\n", t.calib_sphere_n,
                  t.kappa, t.quads.size());
    out << buf;
    for (std::size_t q = 0; q < t.quads.size(); ++q) {
        std::snprintf(buf, sizeof buf, "%u %u %u %u %.17g\n", t.quads[q].j, t.quads[q].l,
                      t.quads[q].jp, t.quads[q].lp, t.raw_weight[q]);
        out << buf;
    }
    if (!out) throw IoError("save_dvm_table: write failed for " + path);
}

DVMTable load_dvm_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_dvm_table: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != "# fuzzybz dvm table v1") throw IoError("load_dvm_table: bad header in " + path);
    DVMTable t;
    std::size_t count = 0;
    auto expect = [&](const char* key) -> std::string {
        std::getline(in, line);
        std::istringstream ss(line);
        std::string k, v;
        ss >> k;
        std::getline(ss, v);
        if (k != key) throw IoError(std::string("load_dvm_table: expected key ") + key);
        return v;
    };
    t.lattice.d = std::stoi(expect("d"));
    t.lattice.nv = std::stoi(expect("nv"));
    t.lattice.vmax = std::stod(expect("vmax"));
    t.mu = std::stod(expect("mu"));
    t.b0 = std::stod(expect("b0"));
    t.cap = std::stod(expect("cap"));
    t.calib_sphere_n = std::stoi(expect("calib_sphere"));
    t.kappa = std::stod(expect("kappa"));
    count = std::stoul(expect("count"));
    t.quads.reserve(count);
    t.raw_weight.reserve(count);
    for (std::size_t q = 0; q < count; ++q) {
        DVMTable::Quad qu;
        double w;
        if (!(in >> qu.j >> qu.l >> qu.jp >> qu.lp >> w))
            throw IoError("load_dvm_table: truncated table in " + path);
        t.quads.push_back(qu);
        t.raw_weight.push_back(w);
    }
    t.weight.resize(count);
    for (std::size_t q = 0; q < count; ++q) t.weight[q] = t.kappa * t.raw_weight[q];

    // re-check conservation of every row in integer lattice arithmetic
    const int d = t.lattice.d;
    int cj[3], cl[3], cjp[3], clp[3];
    for (const auto& qu : t.quads) {
        t.lattice.coords((int)qu.j, cj);
        t.lattice.coords((int)qu.l, cl);
        t.lattice.coords((int)qu.jp, cjp);
        t.lattice.coords((int)qu.lp, clp);
        int e = 0, ep = 0;
        for (int a = 0; a < d; ++a) {
            if (cj[a] + cl[a] != cjp[a] + clp[a])
                throw IoError("load_dvm_table: momentum violation in " + path);
            e += cj[a] * cj[a] + cl[a] * cl[a];
            ep += cjp[a] * cjp[a] + clp[a] * clp[a];
        }
        if (e != ep) throw IoError("load_dvm_table: energy violation in " + path);
    }
    return t;
}

}  // namespace fbz
