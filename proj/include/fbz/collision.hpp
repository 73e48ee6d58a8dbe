#ifndef FBZ_COLLISION_HPP
#define FBZ_COLLISION_HPP

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "fbz/core.hpp"
#include "fbz/geometry.hpp"
#include "fbz/kernels.hpp"
#include "fbz/parallel.hpp"
#include "fbz/state.hpp"

namespace fbz {

// Rate of collisions per tuple: the density U of the flux measure with
// respect to the weighted tuple measure w (which absorbs B, k, the angular
// weight and the cell volumes). For a solution, U = f f_* - f' f'_*.
//
// Desk-scale tuple sets are far too large for dense per-tuple storage, so
// fluxes are carried in structured form:
//   zero         U = 0
//   scaled_true  U = scale * (g g_* - g' g'_*) for a stored density g
//   sparse       explicit (tuple id, value) entries, everything else 0
//   dense        one value per tuple; tiny instances only
struct CollisionFlux {
    enum class Kind { zero, scaled_true, sparse, dense };
    Kind kind = Kind::zero;
    std::shared_ptr<const Density> base;  // scaled_true
    double scale = 1.0;
    std::vector<std::pair<std::uint64_t, double>> entries;  // sparse, sorted by id
    std::vector<double> values;                             // dense
};

// Enumerated collision tuple set over a phase grid for one of two backends:
//   dvm         (x_i, x_k, quadruple): exact conservation and microreversibility
//   quadrature  (x_i, x_k, v_j, v_l, w_m): sphere nodes, multilinear
//               interpolation at the off-grid post-collision velocities
// The divergence is assembled as the exact transpose of the gradient gather,
// so <phi, div U> = 1/4 <gradbar phi, U> holds to roundoff by construction.
class TupleSpace {
  public:
    enum class Backend { dvm, quadrature };

    static TupleSpace make_dvm(const PhaseGrid& grid, const SpatialKernel& sk, DVMTable table);
    static TupleSpace make_quadrature(const PhaseGrid& grid, const SpatialKernel& sk,
                                      const CollisionKernel& ck, const SphereQuadrature& sq);

    Backend backend() const { return backend_; }
    const PhaseGrid& grid() const { return grid_; }
    const DVMTable& dvm_table() const;

    std::size_t n_vtuples() const { return nvt_; }
    std::size_t n_xpairs() const { return std::size_t(ncx_) * ncx_; }
    std::size_t n_tuples() const { return nvt_ * n_xpairs(); }

    // fraction of velocity-tuple weight dropped because a post-collision
    // velocity leaves the box (quadrature backend; 0 for dvm)
    double dropped_fraction() const { return dropped_fraction_; }

    // folded spatial kernel at the offset of a cell pair (no volume factor);
    // entries below 1e-14 * k(0) are zeroed
    double k_pair(int i, int k) const { return koff_[offset_index(i, k)]; }
    // sum over all ordered cell pairs of K_{ik} * Vx^2
    double spatial_mass() const { return spatial_mass_; }

    // G[j*ncx + a] = sum_k K[a-k] field[j*ncx + k] * Vx, every row
    void convolve_rows(const std::vector<double>& field, std::vector<double>& G) const;

    // collision operator and its weak/adjoint structure
    std::vector<double> apply_Q(const Density& f) const;
    // same assembly on a raw nonnegative field (iteration schemes work with
    // states of mass < 1)
    std::vector<double> apply_Q_raw(const std::vector<double>& values) const;
    std::vector<double> divergence(const CollisionFlux& U) const;
    double weak_form(const Density& f, const std::vector<double>& phi) const;
    CollisionFlux true_flux(const Density& f) const { return scaled_true_flux(f, 1.0); }
    CollisionFlux zero_flux() const { return CollisionFlux{}; }
    CollisionFlux scaled_true_flux(const Density& f, double scale) const;
    CollisionFlux sparse_random_flux(std::uint64_t seed, std::size_t count, double amp) const;
    CollisionFlux dense_random_flux(std::uint64_t seed, double amp) const;
    static CollisionFlux scale_flux(const CollisionFlux& U, double factor);

    // gradbar of a grid function at one tuple: phi' + phi'_* - phi - phi_*
    double gradbar(const std::vector<double>& phi, std::uint64_t tuple_id) const;
    // sigma-measure weight of one tuple
    double tuple_weight(std::uint64_t tuple_id) const;

    // 1/4 sum_tuples gradbar(phi) U w
    double pairing(const std::vector<double>& phi, const CollisionFlux& U) const;
    // 1/4 sum over {theta(f) > 0} of gradbar(log f) U w; tuples carrying flux
    // where theta(f) = 0 are counted into *violations when given
    double pairing_grad_log(const Density& f, const CollisionFlux& U,
                            std::size_t* violations = nullptr) const;
    double total_variation(const CollisionFlux& U) const;

    // sup over cells of the loss-rate coefficient sum B k f_* (per unit f)
    double max_loss_rate(const Density& f) const;
    // sup of the loss rate per unit mass over every admissible state; the
    // damping constant of the positivity-preserving schemes is twice this
    double loss_coefficient_sup() const { return loss_coeff_sup_; }
    // true when B is bounded on its own (mu <= 0) or capped
    bool kernel_bounded() const;

    // Reduces fn(s, t, u, w) over every tuple, with s = f f_*, t = f' f'_*,
    // u the flux density (0 when U is null) and w the sigma weight of the
    // tuple. Collapses the spatial double sum when all participating fields
    // are uniform in x. Deterministic lane-ordered summation.
    template <class F>
    double reduce_tuples(const Density& f, const CollisionFlux* U, F&& fn) const;

    struct VtDecode {
        int j, l;         // pre-collision node indices
        int jp, lp;       // dvm post indices (-1 for quadrature)
        int n1, n2;       // stencil sizes (quadrature)
        int s1[8], s2[8];
        double c1[8], c2[8];
        double w_vel;     // backend weight (B and angular share / sphere weight)
        bool dropped;
    };
    VtDecode decode_vtuple(std::size_t t) const;

  private:
    TupleSpace() = default;
    std::size_t offset_index(int i, int k) const;
    void build_spatial(const PhaseGrid& grid, const SpatialKernel& sk);
    template <class F>
    double reduce_general(const Density& f, const CollisionFlux* U, F&& fn) const;
    template <class F>
    double reduce_uniform(const Density& f, const CollisionFlux* U, F&& fn) const;
    void scatter_tuple(std::uint64_t tuple_id, double flux_value, double* out) const;
    std::vector<double> divergence_true_raw(const std::vector<double>& g, double scale) const;
    std::vector<double> divergence_true(const Density& g, double scale) const;
    void finish_build();
    double weak_pairing_rows(const std::vector<double>& phi, const Density& g, double scale) const;
    double grad_log_gated_true(const Density& f, const std::vector<double>& logf, const Density& g,
                               double scale, std::size_t* violations) const;

    Backend backend_ = Backend::dvm;
    PhaseGrid grid_;
    SpatialKernel sk_;
    int ncx_ = 0, nnv_ = 0;
    std::size_t nvt_ = 0;
    double vvol_ = 0.0, xvol_ = 0.0;
    double spatial_mass_ = 0.0;
    double ksum_x_ = 0.0;  // sum_off K[off] * Vx
    double dropped_fraction_ = 0.0;
    double loss_coeff_sup_ = 0.0;
    std::vector<double> koff_;  // kernel value per cell offset
    std::vector<int> neigh_;    // [a*ncx + off] = cell at offset off from a
    // dvm
    std::shared_ptr<const DVMTable> table_;
    // quadrature
    CollisionKernel ck_;
    SphereQuadrature sq_;
    std::vector<double> wvel_;  // per velocity tuple; 0 when dropped
};

// ---- inline/template implementation --------------------------------------

inline std::size_t TupleSpace::offset_index(int i, int k) const {
    int ci[3], ck[3], co[3] = {0, 0, 0};
    grid_.x_coords(i, ci);
    grid_.x_coords(k, ck);
    for (int a = 0; a < grid_.d; ++a) {
        int o = ci[a] - ck[a];
        if (o < 0) o += grid_.nx;
        co[a] = o;
    }
    return grid_.x_flat(co);
}

inline TupleSpace::VtDecode TupleSpace::decode_vtuple(std::size_t t) const {
    VtDecode out{};
    if (backend_ == Backend::dvm) {
        const auto& q = table_->quads[t];
        out.j = int(q.j);
        out.l = int(q.l);
        out.jp = int(q.jp);
        out.lp = int(q.lp);
        out.n1 = out.n2 = 0;
        out.w_vel = table_->weight[t];
        out.dropped = false;
        return out;
    }
    const std::size_t nw = sq_.nodes.size();
    std::size_t m = t % nw;
    std::size_t jl = t / nw;
    out.l = int(jl % nnv_);
    out.j = int(jl / nnv_);
    out.jp = out.lp = -1;
    out.w_vel = wvel_[t];
    out.dropped = (out.w_vel == 0.0);
    if (out.dropped) return out;

    VelocityLattice lat = grid_.lattice();
    auto [vp, vsp] = collide(lat.velocity(out.j), lat.velocity(out.l), sq_.nodes[m], grid_.d);
    const double dv = lat.dv();
    auto stencil = [&](const Vec& v, int* nodes, double* coefs) -> int {
        int base[3] = {0, 0, 0};
        double fr[3] = {0, 0, 0};
        for (int a = 0; a < grid_.d; ++a) {
            double xi = (v[a] + grid_.vmax) / dv - 0.5;
            double fl = std::floor(xi);
            int b = int(fl);
            double f = xi - fl;
            // clamp the boundary cases; validity was decided at construction
            if (b < 0) {
                b = 0;
                f = 0.0;
            } else if (b >= grid_.nv - 1) {
                b = grid_.nv - 2;
                f = 1.0;
            }
            base[a] = b;
            fr[a] = f;
        }
        int n = 0;
        const int corners = 1 << grid_.d;
        for (int c = 0; c < corners; ++c) {
            int idx[3] = {0, 0, 0};
            double w = 1.0;
            for (int a = 0; a < grid_.d; ++a) {
                int bit = (c >> a) & 1;
                idx[a] = base[a] + bit;
                w *= bit ? fr[a] : (1.0 - fr[a]);
            }
            nodes[n] = lat.flat(idx);
            coefs[n] = w;
            ++n;
        }
        return n;
    };
    out.n1 = stencil(vp, out.s1, out.c1);
    out.n2 = stencil(vsp, out.s2, out.c2);
    return out;
}

template <class F>
double TupleSpace::reduce_general(const Density& f, const CollisionFlux* U, F&& fn) const {
    const double* fv = f.values().data();
    const Density* gbase = nullptr;
    double gscale = 0.0;
    const std::vector<double>* dense = nullptr;
    if (U) {
        switch (U->kind) {
            case CollisionFlux::Kind::zero: break;
            case CollisionFlux::Kind::scaled_true:
                gbase = U->base.get();
                gscale = U->scale;
                break;
            case CollisionFlux::Kind::dense: dense = &U->values; break;
            case CollisionFlux::Kind::sparse:
                throw Error("reduce_tuples: sparse fluxes have no product form");
        }
    }
    const double* gv = gbase ? gbase->values().data() : nullptr;
    const double wfac = vvol_ * vvol_ * xvol_ * xvol_;
    const std::size_t npairs = n_xpairs();

    return lane_sum(nvt_, [&](int, std::size_t b, std::size_t e) {
        Kahan acc;
        std::vector<double> fp(ncx_), fsp(ncx_), gp, gsp;
        if (gv) {
            gp.resize(ncx_);
            gsp.resize(ncx_);
        }
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped || vt.w_vel == 0.0) continue;
            const double* frj = fv + std::size_t(vt.j) * ncx_;
            const double* frl = fv + std::size_t(vt.l) * ncx_;
            const double* grj = gv ? gv + std::size_t(vt.j) * ncx_ : nullptr;
            const double* grl = gv ? gv + std::size_t(vt.l) * ncx_ : nullptr;
            if (backend_ == Backend::dvm) {
                const double* a1 = fv + std::size_t(vt.jp) * ncx_;
                const double* a2 = fv + std::size_t(vt.lp) * ncx_;
                for (int a = 0; a < ncx_; ++a) {
                    fp[a] = a1[a];
                    fsp[a] = a2[a];
                }
                if (gv) {
                    const double* b1 = gv + std::size_t(vt.jp) * ncx_;
                    const double* b2 = gv + std::size_t(vt.lp) * ncx_;
                    for (int a = 0; a < ncx_; ++a) {
                        gp[a] = b1[a];
                        gsp[a] = b2[a];
                    }
                }
            } else {
                for (int a = 0; a < ncx_; ++a) {
                    double v1 = 0.0, v2 = 0.0;
                    for (int p = 0; p < vt.n1; ++p) v1 += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_ + a];
                    for (int p = 0; p < vt.n2; ++p) v2 += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx_ + a];
                    fp[a] = v1;
                    fsp[a] = v2;
                }
                if (gv)
                    for (int a = 0; a < ncx_; ++a) {
                        double v1 = 0.0, v2 = 0.0;
                        for (int p = 0; p < vt.n1; ++p) v1 += vt.c1[p] * gv[std::size_t(vt.s1[p]) * ncx_ + a];
                        for (int p = 0; p < vt.n2; ++p) v2 += vt.c2[p] * gv[std::size_t(vt.s2[p]) * ncx_ + a];
                        gp[a] = v1;
                        gsp[a] = v2;
                    }
            }
            const double wq = vt.w_vel * wfac;
            for (int a = 0; a < ncx_; ++a) {
                const int* na = neigh_.data() + std::size_t(a) * ncx_;
                for (int off = 0; off < ncx_; ++off) {
                    double kk = koff_[off];
                    if (kk == 0.0) continue;
                    int k = na[off];
                    double s = frj[a] * frl[k];
                    double tt = fp[a] * fsp[k];
                    double u = 0.0;
                    if (gv)
                        u = gscale * (grj[a] * grl[k] - gp[a] * gsp[k]);
                    else if (dense)
                        u = (*dense)[t * npairs + std::size_t(a) * ncx_ + k];
                    acc.add(fn(s, tt, u, wq * kk));
                }
            }
        }
        return acc.value();
    });
}

template <class F>
double TupleSpace::reduce_uniform(const Density& f, const CollisionFlux* U, F&& fn) const {
    const double* fv = f.values().data();
    const Density* gbase = nullptr;
    double gscale = 0.0;
    if (U && U->kind == CollisionFlux::Kind::scaled_true) {
        gbase = U->base.get();
        gscale = U->scale;
    }
    const double* gv = gbase ? gbase->values().data() : nullptr;
    const double smass = spatial_mass_ * vvol_ * vvol_;
    return lane_sum(nvt_, [&](int, std::size_t b, std::size_t e) {
        Kahan acc;
        for (std::size_t t = b; t < e; ++t) {
            VtDecode vt = decode_vtuple(t);
            if (vt.dropped || vt.w_vel == 0.0) continue;
            double fj = fv[std::size_t(vt.j) * ncx_];
            double fl = fv[std::size_t(vt.l) * ncx_];
            double f1 = 0.0, f2 = 0.0, g1 = 0.0, g2 = 0.0;
            if (backend_ == Backend::dvm) {
                f1 = fv[std::size_t(vt.jp) * ncx_];
                f2 = fv[std::size_t(vt.lp) * ncx_];
                if (gv) {
                    g1 = gv[std::size_t(vt.jp) * ncx_];
                    g2 = gv[std::size_t(vt.lp) * ncx_];
                }
            } else {
                for (int p = 0; p < vt.n1; ++p) f1 += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx_];
                for (int p = 0; p < vt.n2; ++p) f2 += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx_];
                if (gv) {
                    for (int p = 0; p < vt.n1; ++p) g1 += vt.c1[p] * gv[std::size_t(vt.s1[p]) * ncx_];
                    for (int p = 0; p < vt.n2; ++p) g2 += vt.c2[p] * gv[std::size_t(vt.s2[p]) * ncx_];
                }
            }
            double u = 0.0;
            if (gv)
                u = gscale * (gv[std::size_t(vt.j) * ncx_] * gv[std::size_t(vt.l) * ncx_] - g1 * g2);
            acc.add(fn(fj * fl, f1 * f2, u, vt.w_vel * smass));
        }
        return acc.value();
    });
}

template <class F>
double TupleSpace::reduce_tuples(const Density& f, const CollisionFlux* U, F&& fn) const {
    bool uni = f.uniform_in_x();
    if (U) {
        if (U->kind == CollisionFlux::Kind::sparse)
            throw Error("reduce_tuples: sparse fluxes have no product form");
        if (U->kind == CollisionFlux::Kind::dense) uni = false;
        if (U->kind == CollisionFlux::Kind::scaled_true && uni) uni = U->base->uniform_in_x();
    }
    if (uni) return reduce_uniform(f, U, fn);
    return reduce_general(f, U, fn);
}

}  // namespace fbz

#endif
