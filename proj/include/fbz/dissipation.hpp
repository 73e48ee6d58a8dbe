#ifndef FBZ_DISSIPATION_HPP
#define FBZ_DISSIPATION_HPP

#include <cstddef>
#include <vector>

#include "fbz/collision.hpp"
#include "fbz/core.hpp"
#include "fbz/state.hpp"

namespace fbz {

// The two shipped dissipation structures. The flux-density map and the dual
// dissipation density come as a matched pair; mixing them breaks the
// compatibility identity (psi*)'(log s - log t) theta(s,t) = s - t, so the
// pairing is a closed enumeration rather than a plugin point.
//   quadratic: theta = logarithmic mean,  psi(r) = psi*(r) = r^2/2
//   cosh:      theta = geometric mean,    psi*(x) = 4(cosh(x/2) - 1)
// Both dual densities satisfy the exponential envelope psi*(r) <= c1 e^{c2 r}
// (cosh: c1 = 4, c2 = 1/2; quadratic trivially).
enum class GradStructure { quadratic, cosh };

// Logarithmic mean (s - t) / (log s - log t), with the exact diagonal branch,
// a 4-term series near the diagonal, and 0 whenever either argument is 0.
double log_mean(double s, double t);
double geo_mean(double s, double t);
double theta_mean(GradStructure st, double s, double t);

struct PsiEval {
    double psi;             // primal dissipation density
    double psi_star;        // dual density
    double psi_star_prime;  // derivative of the dual
};
PsiEval psi_pair_eval(GradStructure st, double r);

// G_psi*(s,t) = 1/4 psi*(log t - log s) theta(s,t), extended by its closed
// branch table. Quadratic: (s-t)(log s - log t)/8 with +inf when exactly one
// argument vanishes. cosh: (sqrt s - sqrt t)^2 / 2 everywhere.
double g_psi_star(GradStructure st, double s, double t);

// G_psi(s,t,u) = 1/4 psi(u / theta) theta, 0 when theta = 0 and u = 0,
// +inf when theta = 0 and u != 0.
double g_psi(GradStructure st, double s, double t, double u);

// Entropy dissipation 1/4 sum (t - s)(log t - log s) w over tuples, with
// s = f f_*, t = f' f'_*. Tuples where both products vanish contribute 0;
// tuples where exactly one vanishes are skipped and counted.
double entropy_dissipation_D(const TupleSpace& ts, const Density& f,
                             std::size_t* skipped = nullptr);

// sum G_psi*(f f_*, f' f'_*) w. Quadratic structure returns +inf (with the
// offending tuple count) when a positive-weight tuple has exactly one
// vanishing product.
double d_psi_star(const TupleSpace& ts, const Density& f, GradStructure st,
                  std::size_t* infinite_tuples = nullptr);

// Primal dissipation potential sum G_psi(f f_*, f' f'_*, U) w; +inf when the
// flux charges a tuple with theta = 0.
double big_R(const TupleSpace& ts, const Density& f, const CollisionFlux& U, GradStructure st,
             std::size_t* infinite_tuples = nullptr);

// Dual potential 1/4 sum psi*(xi) theta(f) w over {theta(f) > 0}.
struct XiSpec {
    enum class Kind {
        zero,
        neg_gradbar_log,  // xi = log s - log t per tuple (product convention)
        dense             // explicit per-tuple values, tiny instances only
    };
    Kind kind = Kind::zero;
    std::vector<double> values;
};
double big_R_star(const TupleSpace& ts, const Density& f, const XiSpec& xi, GradStructure st);

}  // namespace fbz

#endif
