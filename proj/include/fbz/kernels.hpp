#ifndef FBZ_KERNELS_HPP
#define FBZ_KERNELS_HPP

#include <functional>
#include <optional>

#include "fbz/core.hpp"

namespace fbz {

// Japanese bracket <z> = sqrt(1 + |z|^2).
double bracket(const Vec& z, int d);

// Collision kernel B(v - v_*, w) = b0 * <v - v_*>^mu * profile(|cos|).
// The family depends on the relative velocity only through its norm, so
// invariance under the pre/post-collision reflection holds structurally.
struct CollisionKernel {
    double mu = 0.0;  // growth exponent, mu <= 1
    double b0 = 1.0;  // amplitude, > 0
    // optional bounded positive angular profile of |<(v-v_*)/|v-v_*|, w>|
    std::function<double(double)> angular_profile;
    // optional pointwise cap min(B, m); 0 = no cap
    double cap = 0.0;

    // two-sided constant: C_B^{-1} <z>^mu <= B <= C_B <z>^mu
    double two_sided_constant() const;
    // sup of B over relative velocities of norm <= r (profile bound taken as 1)
    double sup_on_ball(double r) const;
};

double eval_B(const CollisionKernel& k, const Vec& v_rel, const Vec& omega, int d);

// B truncated at level m: pointwise min(B, m).
CollisionKernel truncate_kernel(const CollisionKernel& k, double m);

// Spatial kernel k(z) = c * exp(-gamma <z>), folded onto the torus of side L
// by a truncated image sum.
struct SpatialKernel {
    double gamma = 1.0;
    double c = 1.0;
    int periodization_images = 1;
};

// k evaluated on R^d (no folding).
double eval_k(const SpatialKernel& k, const Vec& z, int d);
// Folded onto the torus: sum of c*exp(-gamma <z + L m>) over image offsets
// m in {-images..images}^d. z is reduced to the fundamental domain first.
double eval_k_torus(const SpatialKernel& k, const Vec& x_rel, double torus_side, int d);

// Gaussian mollifier M_beta(z) = (2 pi beta)^{-d/2} exp(-|z|^2 / (2 beta)).
struct Mollifier {
    double variance = 0.5;
    int dimension = 2;
    double density(const Vec& z) const;
};

// Sampled check of the mollified two-sided bounds
//   B*M_beta <= C B,  B^{-1}*M_beta <= C B^{-1},  k*M_beta <= C k,  k^{-1}*M_beta <= C k^{-1}.
// All four ratio fields are evaluated by midpoint quadrature at every sample
// point of a box grid; a second pass at double quadrature resolution guards
// against under-resolution.
struct DominationReport {
    double max_ratio = 0.0;         // max over the four families and all samples
    double max_ratio_B = 0.0;
    double max_ratio_B_inv = 0.0;
    double max_ratio_k = 0.0;
    double max_ratio_k_inv = 0.0;
    double refinement_disagreement = 0.0;  // relative change of max_ratio under 2x quadrature
    bool quadrature_suspect = false;       // disagreement > 5%
    bool passed = false;                   // max_ratio <= bound_constant
    double bound_constant = 0.0;
};

struct DominationParams {
    double box_half_width = 5.0;
    int samples_per_axis = 21;   // sample grid for the ratio fields
    int quad_points = 48;        // quadrature nodes per axis for the convolution
    double bound_constant = 64.0;  // user constant C to check against
};

DominationReport check_mollifier_domination(const CollisionKernel& B, const SpatialKernel& k,
                                            double beta, int d, const DominationParams& p);

}  // namespace fbz

#endif
