#include "fbz/collision.hpp"

#include <algorithm>
#include <cmath>

namespace fbz {

namespace {
constexpr double kSpatialCut = 1e-14;  // folded k below this * k(0) is zeroed

bool rows_uniform(const std::vector<double>& v, int ncx) {
    const std::size_t rows = v.size() / ncx;
    for (std::size_t j = 0; j < rows; ++j) {
        const double* row = v.data() + j * ncx;
        for (int i = 1; i < ncx; ++i)
            if (row[i] != row[0]) return false;
    }
    return true;
}
}  // namespace

void TupleSpace::build_spatial(const PhaseGrid& grid, const SpatialKernel& sk) {
    grid_ = grid;
    grid_.validate();
    sk_ = sk;
    ncx_ = grid.nx_cells();
    nnv_ = grid.nv_nodes();
    xvol_ = grid.x_cell_volume();
    vvol_ = grid.v_cell_volume();

    koff_.resize(ncx_);
    const double dx = grid.dx();
    double k0 = eval_k_torus(sk, {0, 0, 0}, grid.torus_side, grid.d);
    for (int off = 0; off < ncx_; ++off) {
        int co[3] = {0, 0, 0};
        grid_.x_coords(off, co);
        Vec z = {0, 0, 0};
        for (int a = 0; a < grid.d; ++a) z[a] = co[a] * dx;
        double val = eval_k_torus(sk, z, grid.torus_side, grid.d);
        koff_[off] = (val < kSpatialCut * k0) ? 0.0 : val;
    }
    neigh_.resize(std::size_t(ncx_) * ncx_);
    for (int a = 0; a < ncx_; ++a) {
        int ca[3];
        grid_.x_coords(a, ca);
        for (int off = 0; off < ncx_; ++off) {
            int co[3], ck[3] = {0, 0, 0};
            grid_.x_coords(off, co);
            for (int c = 0; c < grid.d; ++c) {
                int k = ca[c] - co[c];
                if (k < 0) k += grid.nx;
                ck[c] = k;
            }
            neigh_[std::size_t(a) * ncx_ + off] = grid_.x_flat(ck);
        }
    }
    double ks = 0.0;
    for (int off = 0; off < ncx_; ++off) ks += koff_[off];
    ksum_x_ = ks * xvol_;
    spatial_mass_ = double(ncx_) * ks * xvol_ * xvol_;
}

TupleSpace TupleSpace::make_dvm(const PhaseGrid& grid, const SpatialKernel& sk, DVMTable table) {
    if (table.lattice.d != grid.d || table.lattice.nv != grid.nv ||
        table.lattice.vmax != grid.vmax)
        throw Error("TupleSpace: DVM table does not match the grid");
    TupleSpace ts;
    ts.backend_ = Backend::dvm;
    ts.build_spatial(grid, sk);
    ts.table_ = std::make_shared<DVMTable>(std::move(table));
    ts.nvt_ = ts.table_->size();
    ts.finish_build();
    return ts;
}

void TupleSpace::finish_build() {
    // W(b,l) = total backend weight of tuples with pre-collision pair (b,l);
    // the loss rate obeys lambda <= max W * sup k * mass everywhere
    std::vector<double> W(std::size_t(nnv_) * nnv_, 0.0);
    for (std::size_t t = 0; t < nvt_; ++t) {
        VtDecode vt = decode_vtuple(t);
        if (vt.dropped) continue;
        W[std::size_t(vt.j) * nnv_ + vt.l] += vt.w_vel;
    }
    double wmax = 0.0;
    for (double w : W) wmax = std::max(wmax, w);
    double ksup = 0.0;
    for (double k : koff_) ksup = std::max(ksup, k);
    loss_coeff_sup_ = wmax * ksup;
}

bool TupleSpace::kernel_bounded() const {
    if (backend_ == Backend::dvm) return table_->mu <= 0.0 || table_->cap > 0.0;
    return ck_.mu <= 0.0 || ck_.cap > 0.0;
}

TupleSpace TupleSpace::make_quadrature(const PhaseGrid& grid, const SpatialKernel& sk,
                                       const CollisionKernel& ck, const SphereQuadrature& sq) {
    if (sq.d != grid.d) throw Error("TupleSpace: sphere quadrature dimension mismatch");
    TupleSpace ts;
    ts.backend_ = Backend::quadrature;
    ts.build_spatial(grid, sk);
    ts.ck_ = ck;
    ts.sq_ = sq;
    const std::size_t nw = sq.nodes.size();
    ts.nvt_ = std::size_t(ts.nnv_) * ts.nnv_ * nw;
    ts.wvel_.assign(ts.nvt_, 0.0);

    VelocityLattice lat = grid.lattice();
    const double dv = lat.dv();
    auto inside = [&](const Vec& v) {
        for (int a = 0; a < grid.d; ++a) {
            double xi = (v[a] + grid.vmax) / dv - 0.5;
            if (xi < -1e-12 || xi > grid.nv - 1 + 1e-12) return false;
        }
        return true;
    };
    double wtot = 0.0, wdrop = 0.0;
    for (int j = 0; j < ts.nnv_; ++j) {
        Vec vj = lat.velocity(j);
        for (int l = 0; l < ts.nnv_; ++l) {
            Vec vl = lat.velocity(l);
            for (std::size_t m = 0; m < nw; ++m) {
                double w = eval_B(ck, vj - vl, sq.nodes[m], grid.d) * sq.weights[m];
                wtot += w;
                auto [vp, vsp] = collide(vj, vl, sq.nodes[m], grid.d);
                std::size_t t = (std::size_t(j) * ts.nnv_ + l) * nw + m;
                // dropped symmetrically: the whole tuple goes if either
                // post-collision velocity leaves the interpolation hull
                if (inside(vp) && inside(vsp)) {
                    ts.wvel_[t] = w;
                } else {
                    wdrop += w;
                }
            }
        }
    }
    ts.dropped_fraction_ = wtot > 0.0 ? wdrop / wtot : 0.0;
    ts.finish_build();
    return ts;
}

const DVMTable& TupleSpace::dvm_table() const {
    if (backend_ != Backend::dvm || !table_) throw Error("dvm_table: not a DVM tuple space");
    return *table_;
}

void TupleSpace::convolve_rows(const std::vector<double>& field, std::vector<double>& G) const {
    G.assign(field.size(), 0.0);
    const std::size_t rows = field.size() / ncx_;
    for_lanes(rows, [&](int, std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            const double* src = field.data() + j * ncx_;
            double* dst = G.data() + j * ncx_;
            for (int a = 0; a < ncx_; ++a) {
                const int* na = neigh_.data() + std::size_t(a) * ncx_;
                double s = 0.0;
                for (int off = 0; off < ncx_; ++off) s += koff_[off] * src[na[off]];
                dst[a] = s * xvol_;
            }
        }
    });
}

std::vector<double> TupleSpace::divergence_true(const Density& g, double scale) const {
    return divergence_true_raw(g.values(), scale);
}

std::vector<double> TupleSpace::divergence_true_raw(const std::vector<double>& gval,
                                                    double scale) const {
    if (gval.size() != grid_.cells()) throw Error("apply_Q: field size does not match the grid");
    const double* fv = gval.data();
    const std::size_t cells = grid_.cells();
    std::vector<double> out;

    if (rows_uniform(gval, ncx_)) {
        // one representative column; G rows collapse to f * ksum
        std::vector<double> qbar;
        lane_accumulate(nvt_, nnv_, qbar, [&](int, std::size_t b, std::size_t e, double* acc) {
            for (std::size_t t = b; t < e; ++t) {
                VtDecode vt = decode_vtuple(t);
                if (vt.dropped) continue;
                double fj = fv[std::size_t(vt.j) * ncx_];
                double Gl = fv[std::size_t(vt.l) * ncx_] * ksum_x_;
                double fp = 0.0, Gp = 0.0;
                if (backend_ == Backend::dvm) {
                    fp = fv[std::size_t(vt.jp) * ncx_];
                    Gp = fv[std::size_t(vt.lp) * ncx_] * ksum_x_;
                } else {
                    for (int p = 0; p < vt.n1; ++p) fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_];
                    for (int p = 0; p < vt.n2; ++p) Gp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx_];
                    Gp *= ksum_x_;
                }
                double u = fj * Gl - fp * Gp;
                double w = 0.5 * vvol_ * vt.w_vel * u;
                if (backend_ == Backend::dvm) {
                    acc[vt.j] -= w;
                    acc[vt.jp] += w;
                } else {
                    acc[vt.j] -= w;
                    for (int p = 0; p < vt.n1; ++p) acc[vt.s1[p]] += vt.c1[p] * w;
                }
            }
        });
        out.assign(cells, 0.0);
        for (int j = 0; j < nnv_; ++j) {
            double q = scale * qbar[j];
            double* row = out.data() + std::size_t(j) * ncx_;
            for (int a = 0; a < ncx_; ++a) row[a] = q;
        }
        return out;
    }

    std::vector<double> G;
    convolve_rows(gval, G);
    lane_accumulate(nvt_, cells, out, [&](int, std::size_t b, std::size_t e, double* acc) {
        std::vector<double> u(ncx_);
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped) continue;
            const double* frj = fv + std::size_t(vt.j) * ncx_;
            const double* Grl = G.data() + std::size_t(vt.l) * ncx_;
            if (backend_ == Backend::dvm) {
                const double* frjp = fv + std::size_t(vt.jp) * ncx_;
                const double* Grlp = G.data() + std::size_t(vt.lp) * ncx_;
                for (int a = 0; a < ncx_; ++a) u[a] = frj[a] * Grl[a] - frjp[a] * Grlp[a];
            } else {
                for (int a = 0; a < ncx_; ++a) {
                    double fp = 0.0, Gp = 0.0;
                    for (int p = 0; p < vt.n1; ++p) fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_ + a];
                    for (int p = 0; p < vt.n2; ++p) Gp += vt.c2[p] * G[std::size_t(vt.s2[p]) * ncx_ + a];
                    u[a] = frj[a] * Grl[a] - fp * Gp;
                }
            }
            const double w = 0.5 * vvol_ * vt.w_vel;
            double* rj = acc + std::size_t(vt.j) * ncx_;
            for (int a = 0; a < ncx_; ++a) rj[a] -= w * u[a];
            if (backend_ == Backend::dvm) {
                double* rp = acc + std::size_t(vt.jp) * ncx_;
                for (int a = 0; a < ncx_; ++a) rp[a] += w * u[a];
            } else {
                for (int p = 0; p < vt.n1; ++p) {
                    double* rp = acc + std::size_t(vt.s1[p]) * ncx_;
                    double cw = vt.c1[p] * w;
                    for (int a = 0; a < ncx_; ++a) rp[a] += cw * u[a];
                }
            }
        }
    });
    if (scale != 1.0)
        for (double& v : out) v *= scale;
    return out;
}

std::vector<double> TupleSpace::apply_Q(const Density& f) const { return divergence_true(f, 1.0); }

std::vector<double> TupleSpace::apply_Q_raw(const std::vector<double>& values) const {
    return divergence_true_raw(values, 1.0);
}

void TupleSpace::scatter_tuple(std::uint64_t tuple_id, double flux_value, double* out) const {
    const std::size_t npairs = n_xpairs();
    std::size_t t = tuple_id / npairs;
    std::size_t rem = tuple_id % npairs;
    int i = int(rem / ncx_);
    int k = int(rem % ncx_);
    VtDecode vt = decode_vtuple(t);
    if (vt.dropped) return;
    double kk = koff_[offset_index(i, k)];
    if (kk == 0.0) return;
    double w = vt.w_vel * kk * xvol_ * xvol_ * vvol_ * vvol_;
    double v = 0.25 * flux_value * w / (xvol_ * vvol_);
    if (backend_ == Backend::dvm) {
        out[std::size_t(vt.jp) * ncx_ + i] += v;
        out[std::size_t(vt.lp) * ncx_ + k] += v;
    } else {
        for (int p = 0; p < vt.n1; ++p) out[std::size_t(vt.s1[p]) * ncx_ + i] += vt.c1[p] * v;
        for (int p = 0; p < vt.n2; ++p) out[std::size_t(vt.s2[p]) * ncx_ + k] += vt.c2[p] * v;
    }
    out[std::size_t(vt.j) * ncx_ + i] -= v;
    out[std::size_t(vt.l) * ncx_ + k] -= v;
}

std::vector<double> TupleSpace::divergence(const CollisionFlux& U) const {
    const std::size_t cells = grid_.cells();
    switch (U.kind) {
        case CollisionFlux::Kind::zero: return std::vector<double>(cells, 0.0);
        case CollisionFlux::Kind::scaled_true: return divergence_true(*U.base, U.scale);
        case CollisionFlux::Kind::sparse: {
            std::vector<double> out;
            lane_accumulate(U.entries.size(), cells, out,
                            [&](int, std::size_t b, std::size_t e, double* acc) {
                                for (std::size_t n = b; n < e; ++n)
                                    scatter_tuple(U.entries[n].first, U.entries[n].second, acc);
                            });
            return out;
        }
        case CollisionFlux::Kind::dense: {
            std::vector<double> out;
            lane_accumulate(U.values.size(), cells, out,
                            [&](int, std::size_t b, std::size_t e, double* acc) {
                                for (std::size_t id = b; id < e; ++id)
                                    if (U.values[id] != 0.0) scatter_tuple(id, U.values[id], acc);
                            });
            return out;
        }
    }
    throw Error("divergence: unknown flux kind");
}

double TupleSpace::weak_pairing_rows(const std::vector<double>& phi, const Density& g,
                                     double scale) const {
    // 1/2 sum_t w_vel sum_a (phi'(a) - phi(a,j)) * u(a,t) * Vx Vv^2: the
    // particle-swap-folded form of 1/4 <gradbar phi, U_true(g)>.
    const double* fv = g.values().data();
    const double* ph = phi.data();

    if (g.uniform_in_x()) {
        double total = lane_sum(nvt_, [&](int, std::size_t b, std::size_t e) {
            Kahan acc;
            for (std::size_t t = b; t < e; ++t) {
                VtDecode vt = decode_vtuple(t);
                if (vt.dropped) continue;
                double fj = fv[std::size_t(vt.j) * ncx_];
                double Gl = fv[std::size_t(vt.l) * ncx_] * ksum_x_;
                double fp = 0.0, Gp = 0.0;
                if (backend_ == Backend::dvm) {
                    fp = fv[std::size_t(vt.jp) * ncx_];
                    Gp = fv[std::size_t(vt.lp) * ncx_] * ksum_x_;
                } else {
                    for (int p = 0; p < vt.n1; ++p) fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_];
                    for (int p = 0; p < vt.n2; ++p) Gp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx_];
                    Gp *= ksum_x_;
                }
                double u = fj * Gl - fp * Gp;
                if (u == 0.0) continue;
                const double* pj = ph + std::size_t(vt.j) * ncx_;
                Kahan prow;
                if (backend_ == Backend::dvm) {
                    const double* pp = ph + std::size_t(vt.jp) * ncx_;
                    for (int a = 0; a < ncx_; ++a) prow.add(pp[a] - pj[a]);
                } else {
                    for (int a = 0; a < ncx_; ++a) {
                        double pv = 0.0;
                        for (int p = 0; p < vt.n1; ++p)
                            pv += vt.c1[p] * ph[std::size_t(vt.s1[p]) * ncx_ + a];
                        prow.add(pv - pj[a]);
                    }
                }
                acc.add(vt.w_vel * u * prow.value());
            }
            return acc.value();
        });
        return 0.5 * xvol_ * vvol_ * vvol_ * scale * total;
    }

    std::vector<double> G;
    convolve_rows(g.values(), G);
    double total = lane_sum(nvt_, [&](int, std::size_t b, std::size_t e) {
        Kahan acc;
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped) continue;
            const double* frj = fv + std::size_t(vt.j) * ncx_;
            const double* Grl = G.data() + std::size_t(vt.l) * ncx_;
            const double* pj = ph + std::size_t(vt.j) * ncx_;
            Kahan acct;
            if (backend_ == Backend::dvm) {
                const double* frjp = fv + std::size_t(vt.jp) * ncx_;
                const double* Grlp = G.data() + std::size_t(vt.lp) * ncx_;
                const double* pp = ph + std::size_t(vt.jp) * ncx_;
                for (int a = 0; a < ncx_; ++a)
                    acct.add((pp[a] - pj[a]) * (frj[a] * Grl[a] - frjp[a] * Grlp[a]));
            } else {
                for (int a = 0; a < ncx_; ++a) {
                    double fp = 0.0, Gp = 0.0, pv = 0.0;
                    for (int p = 0; p < vt.n1; ++p) {
                        fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_ + a];
                        pv += vt.c1[p] * ph[std::size_t(vt.s1[p]) * ncx_ + a];
                    }
                    for (int p = 0; p < vt.n2; ++p) Gp += vt.c2[p] * G[std::size_t(vt.s2[p]) * ncx_ + a];
                    acct.add((pv - pj[a]) * (frj[a] * Grl[a] - fp * Gp));
                }
            }
            acc.add(vt.w_vel * acct.value());
        }
        return acc.value();
    });
    return 0.5 * xvol_ * vvol_ * vvol_ * scale * total;
}

double TupleSpace::weak_form(const Density& f, const std::vector<double>& phi) const {
    if (phi.size() != grid_.cells()) throw Error("weak_form: test function size mismatch");
    return weak_pairing_rows(phi, f, 1.0);
}

CollisionFlux TupleSpace::scaled_true_flux(const Density& f, double scale) const {
    CollisionFlux U;
    U.kind = CollisionFlux::Kind::scaled_true;
    U.base = std::make_shared<Density>(f);
    U.scale = scale;
    return U;
}

CollisionFlux TupleSpace::sparse_random_flux(std::uint64_t seed, std::size_t count,
                                             double amp) const {
    Rng rng(seed);
    CollisionFlux U;
    U.kind = CollisionFlux::Kind::sparse;
    U.entries.reserve(count);
    const std::uint64_t n = n_tuples();
    const std::size_t npairs = n_xpairs();
    std::size_t guard = 0;
    while (U.entries.size() < count && guard < 100 * count) {
        ++guard;
        std::uint64_t id = rng.next_below(n);
        std::size_t t = id / npairs;
        if (decode_vtuple(t).dropped) continue;
        std::size_t rem = id % npairs;
        if (koff_[offset_index(int(rem / ncx_), int(rem % ncx_))] == 0.0) continue;
        U.entries.emplace_back(id, rng.uniform(-amp, amp));
    }
    std::sort(U.entries.begin(), U.entries.end());
    U.entries.erase(std::unique(U.entries.begin(), U.entries.end(),
                                [](auto& a, auto& b) { return a.first == b.first; }),
                    U.entries.end());
    return U;
}

CollisionFlux TupleSpace::dense_random_flux(std::uint64_t seed, double amp) const {
    if (n_tuples() > (1u << 24))
        throw Error("dense_random_flux: tuple set too large for dense storage");
    CollisionFlux U;
    U.kind = CollisionFlux::Kind::dense;
    U.values.resize(n_tuples());
    const std::size_t npairs = n_xpairs();
    for (std::size_t id = 0; id < U.values.size(); ++id) {
        if (decode_vtuple(id / npairs).dropped) {
            U.values[id] = 0.0;
            continue;
        }
        U.values[id] = amp * (2.0 * hash_unit(seed, id) - 1.0);
    }
    return U;
}

CollisionFlux TupleSpace::scale_flux(const CollisionFlux& U, double factor) {
    CollisionFlux out = U;
    switch (out.kind) {
        case CollisionFlux::Kind::zero: break;
        case CollisionFlux::Kind::scaled_true: out.scale *= factor; break;
        case CollisionFlux::Kind::sparse:
            for (auto& e : out.entries) e.second *= factor;
            break;
        case CollisionFlux::Kind::dense:
            for (auto& v : out.values) v *= factor;
            break;
    }
    return out;
}

double TupleSpace::gradbar(const std::vector<double>& phi, std::uint64_t tuple_id) const {
    const std::size_t npairs = n_xpairs();
    std::size_t t = tuple_id / npairs;
    std::size_t rem = tuple_id % npairs;
    int i = int(rem / ncx_);
    int k = int(rem % ncx_);
    VtDecode vt = decode_vtuple(t);
    double pre = phi[std::size_t(vt.j) * ncx_ + i] + phi[std::size_t(vt.l) * ncx_ + k];
    double post = 0.0;
    if (backend_ == Backend::dvm) {
        post = phi[std::size_t(vt.jp) * ncx_ + i] + phi[std::size_t(vt.lp) * ncx_ + k];
    } else {
        for (int p = 0; p < vt.n1; ++p) post += vt.c1[p] * phi[std::size_t(vt.s1[p]) * ncx_ + i];
        for (int p = 0; p < vt.n2; ++p) post += vt.c2[p] * phi[std::size_t(vt.s2[p]) * ncx_ + k];
    }
    return post - pre;
}

double TupleSpace::tuple_weight(std::uint64_t tuple_id) const {
    const std::size_t npairs = n_xpairs();
    std::size_t t = tuple_id / npairs;
    std::size_t rem = tuple_id % npairs;
    int i = int(rem / ncx_);
    int k = int(rem % ncx_);
    VtDecode vt = decode_vtuple(t);
    if (vt.dropped) return 0.0;
    return vt.w_vel * koff_[offset_index(i, k)] * xvol_ * xvol_ * vvol_ * vvol_;
}

double TupleSpace::pairing(const std::vector<double>& phi, const CollisionFlux& U) const {
    switch (U.kind) {
        case CollisionFlux::Kind::zero: return 0.0;
        case CollisionFlux::Kind::scaled_true: return weak_pairing_rows(phi, *U.base, U.scale);
        case CollisionFlux::Kind::sparse: {
            Kahan s;
            for (const auto& [id, val] : U.entries)
                s.add(0.25 * gradbar(phi, id) * val * tuple_weight(id));
            return s.value();
        }
        case CollisionFlux::Kind::dense: {
            return lane_sum(U.values.size(), [&](int, std::size_t b, std::size_t e) {
                Kahan s;
                for (std::size_t id = b; id < e; ++id)
                    if (U.values[id] != 0.0)
                        s.add(0.25 * gradbar(phi, id) * U.values[id] * tuple_weight(id));
                return s.value();
            });
        }
    }
    throw Error("pairing: unknown flux kind");
}

double TupleSpace::grad_log_gated_true(const Density& f, const std::vector<double>& logf,
                                       const Density& g, double scale,
                                       std::size_t* violations) const {
    // Literal tuple loop with the {theta(f) > 0} gate; used only when f has
    // zeros, which desk-scale solver states never do.
    const double* fv = f.values().data();
    const double* gv = g.values().data();
    const double* lf = logf.data();
    const double wfac = xvol_ * xvol_ * vvol_ * vvol_;
    std::size_t viol_lane[kLanes] = {};
    double total = lane_sum(nvt_, [&](int lane, std::size_t b, std::size_t e) {
        Kahan acc;
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped) continue;
            for (int a = 0; a < ncx_; ++a) {
                const int* na = neigh_.data() + std::size_t(a) * ncx_;
                for (int off = 0; off < ncx_; ++off) {
                    if (koff_[off] == 0.0) continue;
                    int k = na[off];
                    double fp, fsp, gp, gsp, lp, lsp;
                    if (backend_ == Backend::dvm) {
                        fp = fv[std::size_t(vt.jp) * ncx_ + a];
                        fsp = fv[std::size_t(vt.lp) * ncx_ + k];
                        gp = gv[std::size_t(vt.jp) * ncx_ + a];
                        gsp = gv[std::size_t(vt.lp) * ncx_ + k];
                        lp = lf[std::size_t(vt.jp) * ncx_ + a];
                        lsp = lf[std::size_t(vt.lp) * ncx_ + k];
                    } else {
                        fp = fsp = gp = gsp = lp = lsp = 0.0;
                        for (int p = 0; p < vt.n1; ++p) {
                            std::size_t idx = std::size_t(vt.s1[p]) * ncx_ + a;
                            fp += vt.c1[p] * fv[idx];
                            gp += vt.c1[p] * gv[idx];
                            lp += vt.c1[p] * lf[idx];
                        }
                        for (int p = 0; p < vt.n2; ++p) {
                            std::size_t idx = std::size_t(vt.s2[p]) * ncx_ + k;
                            fsp += vt.c2[p] * fv[idx];
                            gsp += vt.c2[p] * gv[idx];
                            lsp += vt.c2[p] * lf[idx];
                        }
                    }
                    double fj = fv[std::size_t(vt.j) * ncx_ + a];
                    double fl = fv[std::size_t(vt.l) * ncx_ + k];
                    double u = scale * (gv[std::size_t(vt.j) * ncx_ + a] *
                                            gv[std::size_t(vt.l) * ncx_ + k] -
                                        gp * gsp);
                    bool pos = fj > 0.0 && fl > 0.0 && fp > 0.0 && fsp > 0.0;
                    if (!pos) {
                        if (u != 0.0) ++viol_lane[lane];
                        continue;
                    }
                    double gb = lp + lsp - lf[std::size_t(vt.j) * ncx_ + a] -
                                lf[std::size_t(vt.l) * ncx_ + k];
                    acc.add(0.25 * gb * u * vt.w_vel * koff_[off] * wfac);
                }
            }
        }
        return acc.value();
    });
    if (violations) {
        *violations = 0;
        for (int lane = 0; lane < kLanes; ++lane) *violations += viol_lane[lane];
    }
    return total;
}

double TupleSpace::pairing_grad_log(const Density& f, const CollisionFlux& U,
                                    std::size_t* violations) const {
    if (violations) *violations = 0;
    if (U.kind == CollisionFlux::Kind::zero) return 0.0;

    std::vector<double> logf(f.size(), 0.0);
    bool any_zero = false;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] > 0.0)
            logf[i] = std::log(f[i]);
        else
            any_zero = true;
    }

    if (U.kind == CollisionFlux::Kind::scaled_true) {
        if (!any_zero) return weak_pairing_rows(logf, *U.base, U.scale);
        return grad_log_gated_true(f, logf, *U.base, U.scale, violations);
    }

    // sparse/dense: literal per-entry evaluation with the positivity gate
    auto eval_entry = [&](std::uint64_t id, double val, Kahan& s, std::size_t& viol) {
        const std::size_t npairs = n_xpairs();
        std::size_t t = id / npairs;
        std::size_t rem = id % npairs;
        int i = int(rem / ncx_);
        int k = int(rem % ncx_);
        VtDecode vt = decode_vtuple(t);
        if (vt.dropped) return;
        bool ok = f[std::size_t(vt.j) * ncx_ + i] > 0.0 && f[std::size_t(vt.l) * ncx_ + k] > 0.0;
        if (backend_ == Backend::dvm) {
            ok = ok && f[std::size_t(vt.jp) * ncx_ + i] > 0.0 &&
                 f[std::size_t(vt.lp) * ncx_ + k] > 0.0;
        } else {
            double fp = 0.0, fsp = 0.0;
            for (int p = 0; p < vt.n1; ++p) fp += vt.c1[p] * f[std::size_t(vt.s1[p]) * ncx_ + i];
            for (int p = 0; p < vt.n2; ++p) fsp += vt.c2[p] * f[std::size_t(vt.s2[p]) * ncx_ + k];
            ok = ok && fp > 0.0 && fsp > 0.0;
        }
        if (!ok) {
            if (val != 0.0) ++viol;
            return;
        }
        s.add(0.25 * gradbar(logf, id) * val * tuple_weight(id));
    };
    Kahan s;
    std::size_t viol = 0;
    if (U.kind == CollisionFlux::Kind::sparse) {
        for (const auto& [id, val] : U.entries) eval_entry(id, val, s, viol);
    } else {
        for (std::size_t id = 0; id < U.values.size(); ++id)
            if (U.values[id] != 0.0) eval_entry(id, U.values[id], s, viol);
    }
    if (violations) *violations = viol;
    return s.value();
}

double TupleSpace::max_loss_rate(const Density& f) const {
    const double* fv = f.values().data();
    bool uni = f.uniform_in_x();
    std::vector<double> G;
    if (!uni) convolve_rows(f.values(), G);

    std::vector<double> loss;
    const std::size_t m = std::size_t(nnv_) * (uni ? 1 : ncx_);
    lane_accumulate(nvt_, m, loss, [&](int, std::size_t b, std::size_t e, double* acc) {
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped) continue;
            if (uni) {
                acc[vt.j] += vt.w_vel * fv[std::size_t(vt.l) * ncx_] * ksum_x_;
            } else {
                const double* Gl = G.data() + std::size_t(vt.l) * ncx_;
                double* row = acc + std::size_t(vt.j) * ncx_;
                for (int a = 0; a < ncx_; ++a) row[a] += vt.w_vel * Gl[a];
            }
        }
    });
    double mx = 0.0;
    for (double v : loss) mx = std::max(mx, v);
    return mx * vvol_;
}

double TupleSpace::total_variation(const CollisionFlux& U) const {
    switch (U.kind) {
        case CollisionFlux::Kind::zero: return 0.0;
        case CollisionFlux::Kind::scaled_true:
            return reduce_tuples(*U.base, &U,
                                 [](double, double, double u, double w) { return std::abs(u) * w; });
        case CollisionFlux::Kind::sparse: {
            Kahan s;
            for (const auto& [id, val] : U.entries) s.add(std::abs(val) * tuple_weight(id));
            return s.value();
        }
        case CollisionFlux::Kind::dense: {
            return lane_sum(U.values.size(), [&](int, std::size_t b, std::size_t e) {
                Kahan s;
                for (std::size_t id = b; id < e; ++id)
                    if (U.values[id] != 0.0) s.add(std::abs(U.values[id]) * tuple_weight(id));
                return s.value();
            });
        }
    }
    throw Error("total_variation: unknown flux kind");
}

}  // namespace fbz
