#ifndef FBZ_GENERIC_HPP
#define FBZ_GENERIC_HPP

#include <vector>

#include "fbz/collision.hpp"
#include "fbz/state.hpp"

namespace fbz {

// Building blocks of the reversible/irreversible decomposition: energy and
// entropy functionals, the antisymmetric transport operator L(f), the
// symmetric dissipative operator M(f) built on the collision tuple set with
// the logarithmic-mean coefficient, and the degeneracy diagnostics.

double energy_E(const Density& f);   // (1/2) int |v|^2 f
double entropy_S(const Density& f);  // -H(f)

// differentials as grid functions
std::vector<double> differential_E(const PhaseGrid& g);            // |v|^2 / 2
std::vector<double> differential_S(const Density& f);              // -(log f + 1)

// spectral derivative along one x axis (periodic), centred differences with
// one-sided closure along one v axis
std::vector<double> ddx_spectral(const PhaseGrid& g, const std::vector<double>& field, int axis);
std::vector<double> ddv_centered(const PhaseGrid& g, const std::vector<double>& field, int axis);

// L(f) g = -div_x(f grad_v g) + div_v(f grad_x g); output sums to zero
std::vector<double> apply_L(const Density& f, const std::vector<double>& g);

// M(f) g assembled through the collision adjoint pair with the per-tuple
// logarithmic-mean coefficient; M dS reproduces the collision operator
// exactly on the DVM backend.
std::vector<double> apply_M(const TupleSpace& ts, const Density& f, const std::vector<double>& g);

struct DegeneracyReport {
    double norm_L_dS = 0.0;  // sup norm, O(h^2) from the v-derivative closure
    double norm_M_dE = 0.0;  // exact zero on the DVM backend
};
DegeneracyReport degeneracy_report(const TupleSpace& ts, const Density& f);

struct BilinearChecks {
    double antisym_defect = 0.0;  // |<g1, L g2> + <g2, L g1>|
    double sym_defect = 0.0;      // |<g1, M g2> - <g2, M g1>|
    double psd_value = 0.0;       // <g1, M g1>
};
BilinearChecks bilinear_form_checks(const TupleSpace& ts, const Density& f,
                                    const std::vector<double>& g1, const std::vector<double>& g2);

// <g1, M g2> evaluated directly as the tuple quadratic form
// 1/4 sum Lambda(f f_*, f' f'_*) gradbar(g1) gradbar(g2) w.
double m_form(const TupleSpace& ts, const Density& f, const std::vector<double>& g1,
              const std::vector<double>& g2);

// entropy production <dS, M dS>; equals the entropy dissipation on the DVM
double entropy_production(const TupleSpace& ts, const Density& f);

double inner(const PhaseGrid& g, const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fbz

#endif
