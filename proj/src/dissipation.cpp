#include "fbz/dissipation.hpp"

#include <atomic>
#include <cmath>
#include <limits>

namespace fbz {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double log_mean(double s, double t) {
    if (!(s >= 0.0) || !(t >= 0.0)) throw Error("log_mean: negative input");
    if (s == t) return s;
    if (s == 0.0 || t == 0.0) return 0.0;
    // series in delta = s/t - 1 near the diagonal; the naive quotient loses
    // all precision there
    double delta = s / t - 1.0;
    if (std::abs(delta) < 1e-4)
        return t * (1.0 + delta * (0.5 + delta * (-1.0 / 12.0 + delta * (1.0 / 24.0))));
    return (s - t) / (std::log(s) - std::log(t));
}

double geo_mean(double s, double t) {
    if (!(s >= 0.0) || !(t >= 0.0)) throw Error("geo_mean: negative input");
    return std::sqrt(s) * std::sqrt(t);
}

double theta_mean(GradStructure st, double s, double t) {
    return st == GradStructure::quadratic ? log_mean(s, t) : geo_mean(s, t);
}

PsiEval psi_pair_eval(GradStructure st, double r) {
    if (!std::isfinite(r)) throw Error("psi_pair_eval: non-finite argument");
    if (st == GradStructure::quadratic) return {0.5 * r * r, 0.5 * r * r, r};
    PsiEval out;
    // psi*(r) = 4(cosh(r/2) - 1) = 8 sinh^2(r/4), stable near 0
    double sh = std::sinh(0.25 * r);
    out.psi_star = 8.0 * sh * sh;
    out.psi_star_prime = 2.0 * std::sinh(0.5 * r);
    // psi(r) = 2 r asinh(r/2) - 2(sqrt(r^2+4) - 2), the convex conjugate
    double root = std::sqrt(r * r + 4.0);
    out.psi = 2.0 * r * std::asinh(0.5 * r) - 2.0 * (r * r) / (root + 2.0);
    return out;
}

double g_psi_star(GradStructure st, double s, double t) {
    if (!(s >= 0.0) || !(t >= 0.0)) throw Error("g_psi_star: negative input");
    if (st == GradStructure::cosh) {
        double d = std::sqrt(s) - std::sqrt(t);
        return 0.5 * d * d;
    }
    if (s == t) return 0.0;  // includes s = t = 0
    if (s == 0.0 || t == 0.0) return kInf;
    return 0.125 * (s - t) * (std::log(s) - std::log(t));
}

double g_psi(GradStructure st, double s, double t, double u) {
    if (!(s >= 0.0) || !(t >= 0.0)) throw Error("g_psi: negative input");
    double th = theta_mean(st, s, t);
    if (th == 0.0) return u == 0.0 ? 0.0 : kInf;
    return 0.25 * psi_pair_eval(st, u / th).psi * th;
}

double entropy_dissipation_D(const TupleSpace& ts, const Density& f, std::size_t* skipped) {
    std::atomic<std::size_t> skip{0};
    double val = ts.reduce_tuples(f, nullptr, [&](double s, double t, double, double w) {
        if (s > 0.0 && t > 0.0) return 0.25 * (t - s) * (std::log(t) - std::log(s)) * w;
        if (s == 0.0 && t == 0.0) return 0.0;
        skip.fetch_add(1, std::memory_order_relaxed);
        return 0.0;
    });
    if (skipped) *skipped = skip.load();
    return val;
}

double d_psi_star(const TupleSpace& ts, const Density& f, GradStructure st,
                  std::size_t* infinite_tuples) {
    std::atomic<std::size_t> bad{0};
    double val;
    if (st == GradStructure::cosh) {
        val = ts.reduce_tuples(f, nullptr, [](double s, double t, double, double w) {
            double d = std::sqrt(s) - std::sqrt(t);
            return 0.5 * d * d * w;
        });
    } else {
        val = ts.reduce_tuples(f, nullptr, [&](double s, double t, double, double w) {
            if (s > 0.0 && t > 0.0) return 0.125 * (s - t) * (std::log(s) - std::log(t)) * w;
            if (s == t) return 0.0;
            bad.fetch_add(1, std::memory_order_relaxed);
            return 0.0;
        });
    }
    std::size_t nbad = bad.load();
    if (infinite_tuples) *infinite_tuples = nbad;
    return nbad ? kInf : val;
}

double big_R(const TupleSpace& ts, const Density& f, const CollisionFlux& U, GradStructure st,
             std::size_t* infinite_tuples) {
    if (infinite_tuples) *infinite_tuples = 0;
    if (U.kind == CollisionFlux::Kind::zero) return 0.0;
    if (U.kind == CollisionFlux::Kind::sparse) {
        // G_psi(s,t,0) = 0, so only tuples the flux charges contribute
        Kahan acc;
        std::size_t bad = 0;
        const double* fv = f.values().data();
        const PhaseGrid& g = ts.grid();
        const int ncx = g.nx_cells();
        for (const auto& [id, uval] : U.entries) {
            double w = ts.tuple_weight(id);
            if (w == 0.0) continue;
            std::size_t npairs = ts.n_xpairs();
            std::size_t t = id / npairs, rem = id % npairs;
            int i = int(rem / ncx), k = int(rem % ncx);
            auto vt = ts.decode_vtuple(t);
            double s = fv[std::size_t(vt.j) * ncx + i] * fv[std::size_t(vt.l) * ncx + k];
            double tt;
            if (vt.jp >= 0) {
                tt = fv[std::size_t(vt.jp) * ncx + i] * fv[std::size_t(vt.lp) * ncx + k];
            } else {
                double fp = 0.0, fsp = 0.0;
                for (int p = 0; p < vt.n1; ++p) fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx + i];
                for (int p = 0; p < vt.n2; ++p) fsp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx + k];
                tt = fp * fsp;
            }
            double gp = g_psi(st, s, tt, uval);
            if (gp == kInf) {
                ++bad;
                continue;
            }
            acc.add(gp * w);
        }
        if (infinite_tuples) *infinite_tuples = bad;
        return bad ? kInf : acc.value();
    }

    std::atomic<std::size_t> bad{0};
    double val = ts.reduce_tuples(f, &U, [&](double s, double t, double u, double w) {
        double th = theta_mean(st, s, t);
        if (th == 0.0) {
            if (u != 0.0) bad.fetch_add(1, std::memory_order_relaxed);
            return 0.0;
        }
        return 0.25 * psi_pair_eval(st, u / th).psi * th * w;
    });
    std::size_t nbad = bad.load();
    if (infinite_tuples) *infinite_tuples = nbad;
    return nbad ? kInf : val;
}

double big_R_star(const TupleSpace& ts, const Density& f, const XiSpec& xi, GradStructure st) {
    switch (xi.kind) {
        case XiSpec::Kind::zero: return 0.0;
        case XiSpec::Kind::neg_gradbar_log:
            return ts.reduce_tuples(f, nullptr, [&](double s, double t, double, double w) {
                if (!(s > 0.0) || !(t > 0.0)) return 0.0;
                double x = std::log(s) - std::log(t);
                return 0.25 * psi_pair_eval(st, x).psi_star * theta_mean(st, s, t) * w;
            });
        case XiSpec::Kind::dense: {
            if (xi.values.size() != ts.n_tuples())
                throw Error("big_R_star: dense xi size mismatch");
            const double* fv = f.values().data();
            const int ncx = ts.grid().nx_cells();
            const std::size_t npairs = ts.n_xpairs();
            return lane_sum(ts.n_tuples(), [&](int, std::size_t b, std::size_t e) {
                Kahan acc;
                for (std::size_t id = b; id < e; ++id) {
                    double w = ts.tuple_weight(id);
                    if (w == 0.0) continue;
                    std::size_t t = id / npairs, rem = id % npairs;
                    int i = int(rem / ncx), k = int(rem % ncx);
                    auto vt = ts.decode_vtuple(t);
                    double s = fv[std::size_t(vt.j) * ncx + i] * fv[std::size_t(vt.l) * ncx + k];
                    double tt;
                    if (vt.jp >= 0) {
                        tt = fv[std::size_t(vt.jp) * ncx + i] * fv[std::size_t(vt.lp) * ncx + k];
                    } else {
                        double fp = 0.0, fsp = 0.0;
                        for (int p = 0; p < vt.n1; ++p)
                            fp += vt.c1[p] * fv[std::size_t(vt.s1[p]) * ncx + i];
                        for (int p = 0; p < vt.n2; ++p)
                            fsp += vt.c2[p] * fv[std::size_t(vt.s2[p]) * ncx + k];
                        tt = fp * fsp;
                    }
                    double th = theta_mean(st, s, tt);
                    if (th == 0.0) continue;
                    acc.add(0.25 * psi_pair_eval(st, xi.values[id]).psi_star * th * w);
                }
                return acc.value();
            });
        }
    }
    throw Error("big_R_star: unknown xi kind");
}

}  // namespace fbz
