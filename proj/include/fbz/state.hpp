#ifndef FBZ_STATE_HPP
#define FBZ_STATE_HPP

#include <string>
#include <utility>
#include <vector>

#include "fbz/core.hpp"
#include "fbz/geometry.hpp"

namespace fbz {

// Phase-space grid: periodic box of side L in x (nx cells per axis, midpoint
// centred), uniform velocity lattice on [-vmax, vmax]^d (nv nodes per axis).
// Grid functions are stored as values[vnode * nx_cells + xcell]; the x index
// runs fastest so collision loops touch contiguous rows.
struct PhaseGrid {
    int d = 2;
    double torus_side = 4.0;
    int nx = 8;
    double vmax = 4.0;
    int nv = 16;

    void validate() const;
    double dx() const { return torus_side / nx; }
    double dvel() const { return 2.0 * vmax / nv; }
    int nx_cells() const {
        int n = 1;
        for (int c = 0; c < d; ++c) n *= nx;
        return n;
    }
    int nv_nodes() const {
        int n = 1;
        for (int c = 0; c < d; ++c) n *= nv;
        return n;
    }
    std::size_t cells() const { return std::size_t(nx_cells()) * nv_nodes(); }
    double x_cell_volume() const { return std::pow(dx(), d); }
    double v_cell_volume() const { return std::pow(dvel(), d); }
    double cell_volume() const { return x_cell_volume() * v_cell_volume(); }
    // x cell centre, coordinates in [-L/2, L/2)
    Vec x_center(int flat) const;
    void x_coords(int flat, int* out) const;
    int x_flat(const int* c) const;
    VelocityLattice lattice() const { return VelocityLattice{d, nv, vmax}; }
    bool operator==(const PhaseGrid& o) const {
        return d == o.d && torus_side == o.torus_side && nx == o.nx && vmax == o.vmax && nv == o.nv;
    }
};

// Nonnegative grid function with unit mass; the evolving state. Construction
// checks both invariants, so every producer in the codebase is audited.
class Density {
  public:
    Density(PhaseGrid grid, std::vector<double> values);
    // rescales a nonnegative raw field to unit mass
    static Density normalized(PhaseGrid grid, std::vector<double> raw);

    const PhaseGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }
    double mass() const;
    bool uniform_in_x() const;  // exact (bitwise) spatial uniformity

  private:
    PhaseGrid grid_;
    std::vector<double> values_;
};

struct MomentReport {
    double mass = 0.0;
    Vec momentum = {0, 0, 0};
    double kinetic_energy = 0.0;  // (1/2) sum |v|^2 f
    double e_pq = 0.0;            // sum (<x>^p + <v>^q) f
    double entropy = 0.0;
};

MomentReport moments(const Density& f, double p, double q);

// Boltzmann-Shannon entropy sum f log f * cellvol, with 0 log 0 = 0.
double entropy(const Density& f);
double entropy(const PhaseGrid& g, const std::vector<double>& values);

// Relative entropy sum f log(f/g) * cellvol; requires g > 0 wherever f > 0.
double relative_entropy(const Density& f, const Density& g);

// Spatially uniform discrete Gaussian at mean velocity u and temperature T,
// renormalised to exact unit mass. Errors out when the velocity box truncates
// more than 1e-8 of the Gaussian mass.
Density maxwellian(const PhaseGrid& grid, const Vec& u, double temperature);

// Discrete Gaussian-family state exp(a + b.v - |v|^2 / (2T))-shaped, with lattice
// moments matched to (mass, momentum, kinetic energy) by Newton iteration.
// This is the exact stationary shape of the DVM collision dynamics.
Density maxwellian_matching(const PhaseGrid& grid, double mass, const Vec& momentum,
                            double kinetic_energy);

// Snapshot files: header (d, L, nx, vmax, nv, time) + value array, in a text
// (CSV) and a little-endian float64 binary variant.
void save_snapshot_csv(const Density& f, double time, const std::string& path);
void save_snapshot_bin(const Density& f, double time, const std::string& path);
std::pair<Density, double> load_snapshot(const std::string& path);

}  // namespace fbz

#endif
