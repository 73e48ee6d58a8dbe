#include "fbz/generic.hpp"

#include <cmath>

#include "fbz/dissipation.hpp"

namespace fbz {

namespace {
bool rows_constant(const std::vector<double>& v, int ncx) {
    const std::size_t rows = v.size() / ncx;
    for (std::size_t j = 0; j < rows; ++j) {
        const double* row = v.data() + j * ncx;
        for (int i = 1; i < ncx; ++i)
            if (row[i] != row[0]) return false;
    }
    return true;
}
}  // namespace

double inner(const PhaseGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != g.cells() || b.size() != g.cells()) throw Error("inner: size mismatch");
    Kahan s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value() * g.cell_volume();
}

double energy_E(const Density& f) {
    const PhaseGrid& g = f.grid();
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    Kahan s;
    for (int j = 0; j < g.nv_nodes(); ++j) {
        double v2 = 0.5 * norm2(lat.velocity(j));
        const double* row = f.values().data() + std::size_t(j) * ncx;
        Kahan rs;
        for (int i = 0; i < ncx; ++i) rs.add(row[i]);
        s.add(v2 * rs.value());
    }
    return s.value() * g.cell_volume();
}

double entropy_S(const Density& f) { return -entropy(f); }

std::vector<double> differential_E(const PhaseGrid& g) {
    std::vector<double> out(g.cells());
    VelocityLattice lat = g.lattice();
    const int ncx = g.nx_cells();
    for (int j = 0; j < g.nv_nodes(); ++j) {
        double v2 = 0.5 * norm2(lat.velocity(j));
        double* row = out.data() + std::size_t(j) * ncx;
        for (int i = 0; i < ncx; ++i) row[i] = v2;
    }
    return out;
}

std::vector<double> differential_S(const Density& f) {
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(f[i] > 0.0)) throw Error("differential_S: density must be strictly positive");
        out[i] = -(std::log(f[i]) + 1.0);
    }
    return out;
}

namespace {

// offset weights of the periodic spectral derivative on n points over side L
// (Nyquist mode dropped for even n)
std::vector<double> spectral_weights(int n, double L) {
    std::vector<double> w(n, 0.0);
    int mmax = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
    for (int o = 0; o < n; ++o) {
        double s = 0.0;
        for (int m = 1; m <= mmax; ++m)
            s += (2.0 * M_PI * m / L) * std::sin(2.0 * M_PI * m * o / n);
        w[o] = -2.0 * s / n;
    }
    return w;
}

}  // namespace

std::vector<double> ddx_spectral(const PhaseGrid& g, const std::vector<double>& field, int axis) {
    if (axis < 0 || axis >= g.d) throw Error("ddx_spectral: bad axis");
    std::vector<double> w = spectral_weights(g.nx, g.torus_side);
    const int ncx = g.nx_cells();
    const int nnv = int(field.size() / ncx);
    int stride[3] = {1, 1, 1};
    for (int a = g.d - 2; a >= 0; --a) stride[a] = stride[a + 1] * g.nx;
    const int st = stride[axis];

    std::vector<double> out(field.size(), 0.0);
    for (int j = 0; j < nnv; ++j) {
        const double* row = field.data() + std::size_t(j) * ncx;
        double* orow = out.data() + std::size_t(j) * ncx;
        const int nlines = ncx / g.nx;
        for (int ln = 0; ln < nlines; ++ln) {
            int rem = ln, base = 0;
            for (int a2 = g.d - 1; a2 >= 0; --a2) {
                if (a2 == axis) continue;
                base += (rem % g.nx) * stride[a2];
                rem /= g.nx;
            }
            for (int i = 0; i < g.nx; ++i) {
                double s = 0.0;
                for (int l = 0; l < g.nx; ++l) {
                    int o = i - l;
                    if (o < 0) o += g.nx;
                    s += w[o] * row[base + std::size_t(l) * st];
                }
                orow[base + std::size_t(i) * st] = s;
            }
        }
    }
    return out;
}

std::vector<double> ddv_centered(const PhaseGrid& g, const std::vector<double>& field, int axis) {
    if (axis < 0 || axis >= g.d) throw Error("ddv_centered: bad axis");
    const int ncx = g.nx_cells();
    const int nv = g.nv;
    const double h = g.dvel();
    int stridev[3] = {1, 1, 1};
    for (int a = g.d - 2; a >= 0; --a) stridev[a] = stridev[a + 1] * nv;
    const int st = stridev[axis];  // in units of velocity rows

    std::vector<double> out(field.size(), 0.0);
    const int nnv = int(field.size() / ncx);
    const int nlines = nnv / nv;
    for (int ln = 0; ln < nlines; ++ln) {
        int rem = ln, base = 0;
        for (int a2 = g.d - 1; a2 >= 0; --a2) {
            if (a2 == axis) continue;
            base += (rem % nv) * stridev[a2];
            rem /= nv;
        }
        auto row = [&](int iv) { return field.data() + std::size_t(base + iv * st) * ncx; };
        auto orow = [&](int iv) { return out.data() + std::size_t(base + iv * st) * ncx; };
        for (int i = 0; i < ncx; ++i) {
            // one-sided second order at the box boundary
            orow(0)[i] = (-3.0 * row(0)[i] + 4.0 * row(1)[i] - row(2)[i]) / (2.0 * h);
            orow(nv - 1)[i] =
                (3.0 * row(nv - 1)[i] - 4.0 * row(nv - 2)[i] + row(nv - 3)[i]) / (2.0 * h);
        }
        for (int iv = 1; iv < nv - 1; ++iv)
            for (int i = 0; i < ncx; ++i)
                orow(iv)[i] = (row(iv + 1)[i] - row(iv - 1)[i]) / (2.0 * h);
    }
    return out;
}

std::vector<double> apply_L(const Density& f, const std::vector<double>& g) {
    const PhaseGrid& grid = f.grid();
    if (g.size() != grid.cells()) throw Error("apply_L: size mismatch");
    std::vector<double> out(grid.cells(), 0.0);
    for (int axis = 0; axis < grid.d; ++axis) {
        std::vector<double> dvg = ddv_centered(grid, g, axis);
        std::vector<double> dxg = ddx_spectral(grid, g, axis);
        for (std::size_t i = 0; i < out.size(); ++i) {
            dvg[i] *= f[i];
            dxg[i] *= f[i];
        }
        std::vector<double> t1 = ddx_spectral(grid, dvg, axis);
        std::vector<double> t2 = ddv_centered(grid, dxg, axis);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += -t1[i] + t2[i];
    }
    return out;
}

std::vector<double> apply_M(const TupleSpace& ts, const Density& f, const std::vector<double>& g) {
    const PhaseGrid& grid = ts.grid();
    if (g.size() != grid.cells()) throw Error("apply_M: size mismatch");
    const int ncx = grid.nx_cells();
    const int nnv = grid.nv_nodes();
    const double* fv = f.values().data();
    const double* gv = g.data();
    const double vvol = grid.v_cell_volume();
    const double xvol = grid.x_cell_volume();

    bool uni = f.uniform_in_x() && rows_constant(g, ncx);
    if (uni) {
        // x-independent tuple values; fold the spatial sum into ksum
        double ksum = 0.0;
        for (int k = 0; k < ncx; ++k) ksum += ts.k_pair(0, k);
        ksum *= xvol;
        std::vector<double> acc;
        lane_accumulate(ts.n_vtuples(), nnv, acc, [&](int, std::size_t b, std::size_t e,
                                                      double* a) {
            for (std::size_t t = b; t < e; ++t) {
                auto vt = ts.decode_vtuple(t);
                if (vt.dropped) continue;
                double s = fv[std::size_t(vt.j) * ncx] * fv[std::size_t(vt.l) * ncx];
                double tt, gb;
                double gj = gv[std::size_t(vt.j) * ncx], gl = gv[std::size_t(vt.l) * ncx];
                if (vt.jp >= 0) {
                    tt = fv[std::size_t(vt.jp) * ncx] * fv[std::size_t(vt.lp) * ncx];
                    gb = gv[std::size_t(vt.jp) * ncx] + gv[std::size_t(vt.lp) * ncx] - gj - gl;
                } else {
                    double fp = 0, fsp = 0, gp = 0, gsp = 0;
                    for (int p = 0; p < vt.n1; ++p) {
                        fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx];
                        gp += vt.c1[p] * gv[std::size_t(vt.s1[p]) * ncx];
                    }
                    for (int p = 0; p < vt.n2; ++p) {
                        fsp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx];
                        gsp += vt.c2[p] * gv[std::size_t(vt.s2[p]) * ncx];
                    }
                    tt = fp * fsp;
                    gb = gp + gsp - gj - gl;
                }
                double val = 0.5 * vvol * ksum * vt.w_vel * log_mean(s, tt) * gb;
                if (val == 0.0) continue;
                if (vt.jp >= 0) {
                    a[vt.j] -= val;
                    a[vt.jp] += val;
                } else {
                    a[vt.j] -= val;
                    for (int p = 0; p < vt.n1; ++p) a[vt.s1[p]] += vt.c1[p] * val;
                }
            }
        });
        std::vector<double> out(grid.cells());
        for (int j = 0; j < nnv; ++j) {
            double* row = out.data() + std::size_t(j) * ncx;
            for (int i = 0; i < ncx; ++i) row[i] = acc[j];
        }
        return out;
    }

    // literal tuple loop; meant for small instances
    const double wfac = xvol * xvol * vvol * vvol;
    const double cvol = xvol * vvol;
    std::vector<double> out;
    lane_accumulate(ts.n_vtuples(), grid.cells(), out, [&](int, std::size_t b, std::size_t e,
                                                           double* acc) {
        for (std::size_t t = b; t < e; ++t) {
            auto vt = ts.decode_vtuple(t);
            if (vt.dropped) continue;
            for (int i = 0; i < ncx; ++i) {
                for (int k = 0; k < ncx; ++k) {
                    double kk = ts.k_pair(i, k);
                    if (kk == 0.0) continue;
                    double s = fv[std::size_t(vt.j) * ncx + i] * fv[std::size_t(vt.l) * ncx + k];
                    double tt, gb;
                    double gj = gv[std::size_t(vt.j) * ncx + i],
                           gl = gv[std::size_t(vt.l) * ncx + k];
                    if (vt.jp >= 0) {
                        tt = fv[std::size_t(vt.jp) * ncx + i] * fv[std::size_t(vt.lp) * ncx + k];
                        gb = gv[std::size_t(vt.jp) * ncx + i] + gv[std::size_t(vt.lp) * ncx + k] -
                             gj - gl;
                    } else {
                        double fp = 0, fsp = 0, gp = 0, gsp = 0;
                        for (int p = 0; p < vt.n1; ++p) {
                            fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx + i];
                            gp += vt.c1[p] * gv[std::size_t(vt.s1[p]) * ncx + i];
                        }
                        for (int p = 0; p < vt.n2; ++p) {
                            fsp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx + k];
                            gsp += vt.c2[p] * gv[std::size_t(vt.s2[p]) * ncx + k];
                        }
                        tt = fp * fsp;
                        gb = gp + gsp - gj - gl;
                    }
                    double val = 0.25 * vt.w_vel * kk * wfac * log_mean(s, tt) * gb / cvol;
                    if (val == 0.0) continue;
                    if (vt.jp >= 0) {
                        acc[std::size_t(vt.jp) * ncx + i] += val;
                        acc[std::size_t(vt.lp) * ncx + k] += val;
                    } else {
                        for (int p = 0; p < vt.n1; ++p)
                            acc[std::size_t(vt.s1[p]) * ncx + i] += vt.c1[p] * val;
                        for (int p = 0; p < vt.n2; ++p)
                            acc[std::size_t(vt.s2[p]) * ncx + k] += vt.c2[p] * val;
                    }
                    acc[std::size_t(vt.j) * ncx + i] -= val;
                    acc[std::size_t(vt.l) * ncx + k] -= val;
                }
            }
        }
    });
    return out;
}

double m_form(const TupleSpace& ts, const Density& f, const std::vector<double>& g1,
              const std::vector<double>& g2) {
    const PhaseGrid& grid = ts.grid();
    const int ncx = grid.nx_cells();
    const double* fv = f.values().data();
    const double wfac = grid.x_cell_volume() * grid.x_cell_volume() * grid.v_cell_volume() *
                        grid.v_cell_volume();

    bool uni = f.uniform_in_x() && rows_constant(g1, ncx) && rows_constant(g2, ncx);
    auto tuple_term = [&](std::size_t t, int i, int k, double kk) {
        auto vt = ts.decode_vtuple(t);
        if (vt.dropped) return 0.0;
        double s = fv[std::size_t(vt.j) * ncx + i] * fv[std::size_t(vt.l) * ncx + k];
        double tt, gb1, gb2;
        if (vt.jp >= 0) {
            tt = fv[std::size_t(vt.jp) * ncx + i] * fv[std::size_t(vt.lp) * ncx + k];
            gb1 = g1[std::size_t(vt.jp) * ncx + i] + g1[std::size_t(vt.lp) * ncx + k] -
                  g1[std::size_t(vt.j) * ncx + i] - g1[std::size_t(vt.l) * ncx + k];
            gb2 = g2[std::size_t(vt.jp) * ncx + i] + g2[std::size_t(vt.lp) * ncx + k] -
                  g2[std::size_t(vt.j) * ncx + i] - g2[std::size_t(vt.l) * ncx + k];
        } else {
            double fp = 0, fsp = 0, p1 = 0, q1 = 0, p2 = 0, q2 = 0;
            for (int p = 0; p < vt.n1; ++p) {
                std::size_t idx = std::size_t(vt.s1[p]) * ncx + i;
                fp += vt.c1[p] * fv[idx];
                p1 += vt.c1[p] * g1[idx];
                p2 += vt.c1[p] * g2[idx];
            }
            for (int p = 0; p < vt.n2; ++p) {
                std::size_t idx = std::size_t(vt.s2[p]) * ncx + k;
                fsp += vt.c2[p] * fv[idx];
                q1 += vt.c2[p] * g1[idx];
                q2 += vt.c2[p] * g2[idx];
            }
            tt = fp * fsp;
            gb1 = p1 + q1 - g1[std::size_t(vt.j) * ncx + i] - g1[std::size_t(vt.l) * ncx + k];
            gb2 = p2 + q2 - g2[std::size_t(vt.j) * ncx + i] - g2[std::size_t(vt.l) * ncx + k];
        }
        return 0.25 * vt.w_vel * kk * wfac * log_mean(s, tt) * gb1 * gb2;
    };

    if (uni) {
        // every spatial pair contributes the same tuple value
        double ksum_pairs =
            ts.spatial_mass() / (grid.x_cell_volume() * grid.x_cell_volume());
        return lane_sum(ts.n_vtuples(), [&](int, std::size_t b, std::size_t e) {
                   Kahan acc;
                   for (std::size_t t = b; t < e; ++t) acc.add(tuple_term(t, 0, 0, 1.0));
                   return acc.value();
               }) *
               ksum_pairs;
    }
    return lane_sum(ts.n_vtuples(), [&](int, std::size_t b, std::size_t e) {
        Kahan acc;
        for (std::size_t t = b; t < e; ++t)
            for (int i = 0; i < ncx; ++i)
                for (int k = 0; k < ncx; ++k) {
                    double kk = ts.k_pair(i, k);
                    if (kk != 0.0) acc.add(tuple_term(t, i, k, kk));
                }
        return acc.value();
    });
}

DegeneracyReport degeneracy_report(const TupleSpace& ts, const Density& f) {
    DegeneracyReport r;
    std::vector<double> LdS = apply_L(f, differential_S(f));
    std::vector<double> MdE = apply_M(ts, f, differential_E(f.grid()));
    for (double v : LdS) r.norm_L_dS = std::max(r.norm_L_dS, std::abs(v));
    for (double v : MdE) r.norm_M_dE = std::max(r.norm_M_dE, std::abs(v));
    return r;
}

BilinearChecks bilinear_form_checks(const TupleSpace& ts, const Density& f,
                                    const std::vector<double>& g1,
                                    const std::vector<double>& g2) {
    const PhaseGrid& g = ts.grid();
    BilinearChecks out;
    std::vector<double> Lg1 = apply_L(f, g1);
    std::vector<double> Lg2 = apply_L(f, g2);
    out.antisym_defect = std::abs(inner(g, g1, Lg2) + inner(g, g2, Lg1));
    std::vector<double> Mg1 = apply_M(ts, f, g1);
    std::vector<double> Mg2 = apply_M(ts, f, g2);
    out.sym_defect = std::abs(inner(g, g1, Mg2) - inner(g, g2, Mg1));
    out.psd_value = inner(g, g1, Mg1);
    return out;
}

double entropy_production(const TupleSpace& ts, const Density& f) {
    return m_form(ts, f, differential_S(f), differential_S(f));
}

}  // namespace fbz
