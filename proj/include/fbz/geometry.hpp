#ifndef FBZ_GEOMETRY_HPP
#define FBZ_GEOMETRY_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fbz/core.hpp"
#include "fbz/kernels.hpp"

namespace fbz {

// Pre/post-collision velocity map
//   v' = v - <v - v_*, w> w,  v'_* = v_* + <v - v_*, w> w.
// Involutive; preserves v + v_* and |v|^2 + |v_*|^2.
std::pair<Vec, Vec> collide(const Vec& v, const Vec& v_star, const Vec& omega, int d);

struct SphereQuadrature {
    int d = 2;
    std::vector<Vec> nodes;      // unit vectors
    std::vector<double> weights; // positive, summing to the surface measure (2pi / 4pi)
};

// d=2: n equispaced angles with equal weights 2pi/n.
// d=3: product Gauss-Legendre in the polar cosine x equispaced azimuth,
// antipodally symmetric, weights summing to 4pi. n is the requested node
// count; the actual count is the nearest workable product.
SphereQuadrature sphere_quadrature(int d, int n);

// Uniform velocity lattice: node j in [0,nv)^d, v = -vmax + (j + 1/2) dv.
struct VelocityLattice {
    int d = 2;
    int nv = 16;
    double vmax = 4.0;
    double dv() const { return 2.0 * vmax / nv; }
    int nodes() const {
        int n = 1;
        for (int c = 0; c < d; ++c) n *= nv;
        return n;
    }
    Vec velocity(int flat) const;
    // integer lattice coordinates of a flat node index
    void coords(int flat, int* out) const;
    int flat(const int* c) const;
};

// Discrete-velocity-model table: every ordered index quadruple (j,l,j',l')
// with exact lattice momentum and energy conservation and (j,l) != (j',l').
// Closed under the pre/post swap and the particle swap with equal weights.
struct DVMTable {
    VelocityLattice lattice;
    struct Quad {
        std::uint32_t j, l, jp, lp;
    };
    std::vector<Quad> quads;
    std::vector<double> weight;      // calibrated: kappa * raw
    std::vector<double> raw_weight;  // B * surface / partner-count, before calibration
    double kappa = 1.0;
    int calib_sphere_n = 16;
    // kernel parameters the weights were built from (for the cache file)
    double mu = 0.0, b0 = 1.0, cap = 0.0;

    std::size_t size() const { return quads.size(); }
};

DVMTable build_dvm_table(const VelocityLattice& lat, const CollisionKernel& kernel,
                         int calib_sphere_n = 16);

// Flat text cache. Loading re-checks the conservation laws of every row.
void save_dvm_table(const DVMTable& t, const std::string& path);
DVMTable load_dvm_table(const std::string& path);

}  // namespace fbz

#endif
