#include "fbz/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "fbz/parallel.hpp"

namespace fbz {

double bracket(const Vec& z, int d) {
    if (!all_finite(z, d)) throw Error("bracket: non-finite input");
    return std::sqrt(1.0 + norm2(z));
}

double CollisionKernel::two_sided_constant() const {
    // B/<z>^mu = b0 * profile in [b0*p_min, b0*p_max]; with the default
    // profile == 1 this is exactly b0.
    double cb = std::max(b0, 1.0 / b0);
    return cb;
}

double CollisionKernel::sup_on_ball(double r) const {
    double base = (mu > 0.0) ? b0 * std::pow(std::sqrt(1.0 + r * r), mu) : b0;
    if (cap > 0.0) base = std::min(base, cap);
    return base;
}

double eval_B(const CollisionKernel& k, const Vec& v_rel, const Vec& omega, int d) {
    if (!all_finite(v_rel, d)) throw Error("eval_B: non-finite relative velocity");
    double on = norm(omega);
    if (std::abs(on - 1.0) > 1e-12) throw Error("eval_B: omega is not a unit vector");
    double val = k.b0 * std::pow(bracket(v_rel, d), k.mu);
    if (k.angular_profile) {
        double r = norm(v_rel);
        double cosang = r > 0.0 ? std::abs(dot(v_rel, omega)) / r : 0.0;
        val *= k.angular_profile(std::min(cosang, 1.0));
    }
    if (k.cap > 0.0) val = std::min(val, k.cap);
    return val;
}

CollisionKernel truncate_kernel(const CollisionKernel& k, double m) {
    if (!(m > 0.0)) throw Error("truncate_kernel: level must be positive");
    CollisionKernel out = k;
    out.cap = (k.cap > 0.0) ? std::min(k.cap, m) : m;
    return out;
}

double eval_k(const SpatialKernel& k, const Vec& z, int d) {
    return k.c * std::exp(-k.gamma * bracket(z, d));
}

double eval_k_torus(const SpatialKernel& k, const Vec& x_rel, double torus_side, int d) {
    if (!(torus_side > 0.0)) throw Error("eval_k_torus: torus side must be positive");
    Vec z = x_rel;
    for (int c = 0; c < d; ++c) {
        // reduce to [-L/2, L/2)
        z[c] -= torus_side * std::floor(z[c] / torus_side + 0.5);
    }
    const int im = k.periodization_images;
    double sum = 0.0;
    int m[3] = {0, 0, 0};
    // image sum in a fixed lexicographic order for reproducibility
    for (m[0] = -im; m[0] <= im; ++m[0]) {
        for (m[1] = (d > 1 ? -im : 0); m[1] <= (d > 1 ? im : 0); ++m[1]) {
            for (m[2] = (d > 2 ? -im : 0); m[2] <= (d > 2 ? im : 0); ++m[2]) {
                Vec zi = z;
                for (int c = 0; c < d; ++c) zi[c] += torus_side * m[c];
                sum += eval_k(k, zi, d);
            }
        }
    }
    return sum;
}

double Mollifier::density(const Vec& z) const {
    double n2 = norm2(z);
    return std::pow(2.0 * M_PI * variance, -0.5 * dimension) * std::exp(-n2 / (2.0 * variance));
}

namespace {

// Midpoint-rule convolution (F * M_beta)(z0) over [-w, w]^d around the
// mollifier's centre. With w >= 6 sqrt(beta) the truncated Gaussian mass is
// far below the 1% refinement guard.
double convolve_at(const std::function<double(const Vec&)>& F, double beta, int d, const Vec& z0,
                   int nq) {
    double w = 6.0 * std::sqrt(beta);
    double h = 2.0 * w / nq;
    const double norm_c = std::pow(2.0 * M_PI * beta, -0.5 * d);
    double sum = 0.0;
    if (d == 1) {
        for (int i = 0; i < nq; ++i) {
            double y = -w + (i + 0.5) * h;
            Vec zi = z0;
            zi[0] -= y;
            sum += F(zi) * std::exp(-y * y / (2.0 * beta));
        }
        return sum * norm_c * h;
    }
    if (d == 2) {
        for (int i = 0; i < nq; ++i) {
            double yi = -w + (i + 0.5) * h;
            double gi = std::exp(-yi * yi / (2.0 * beta));
            for (int j = 0; j < nq; ++j) {
                double yj = -w + (j + 0.5) * h;
                Vec zi = z0;
                zi[0] -= yi;
                zi[1] -= yj;
                sum += F(zi) * gi * std::exp(-yj * yj / (2.0 * beta));
            }
        }
        return sum * norm_c * h * h;
    }
    for (int i = 0; i < nq; ++i) {
        double yi = -w + (i + 0.5) * h;
        double gi = std::exp(-yi * yi / (2.0 * beta));
        for (int j = 0; j < nq; ++j) {
            double yj = -w + (j + 0.5) * h;
            double gj = std::exp(-yj * yj / (2.0 * beta));
            for (int l = 0; l < nq; ++l) {
                double yl = -w + (l + 0.5) * h;
                Vec zi = z0;
                zi[0] -= yi;
                zi[1] -= yj;
                zi[2] -= yl;
                sum += F(zi) * gi * gj * std::exp(-yl * yl / (2.0 * beta));
            }
        }
    }
    return sum * norm_c * h * h * h;
}

struct RatioScan {
    double B = 0.0, B_inv = 0.0, k = 0.0, k_inv = 0.0;
    double overall() const { return std::max(std::max(B, B_inv), std::max(k, k_inv)); }
};

RatioScan scan(const CollisionKernel& B, const SpatialKernel& k, double beta, int d,
               const DominationParams& p, int nq) {
    // B is evaluated with a fixed unit direction; the family depends on |z| only.
    Vec e1 = vec3(1, 0, 0);
    auto fB = [&](const Vec& z) { return eval_B(B, z, e1, d); };
    auto fBinv = [&](const Vec& z) { return 1.0 / eval_B(B, z, e1, d); };
    auto fk = [&](const Vec& z) { return eval_k(k, z, d); };
    auto fkinv = [&](const Vec& z) { return 1.0 / eval_k(k, z, d); };

    const int ns = p.samples_per_axis;
    const double hw = p.box_half_width;
    std::size_t total = 1;
    for (int c = 0; c < d; ++c) total *= ns;

    double mx[4][kLanes] = {};
    for_lanes(total, [&](int lane, std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) {
            std::size_t rem = s;
            Vec z = {0, 0, 0};
            for (int c = 0; c < d; ++c) {
                int idx = static_cast<int>(rem % ns);
                rem /= ns;
                z[c] = ns == 1 ? 0.0 : -hw + 2.0 * hw * idx / (ns - 1);
            }
            double rB = convolve_at(fB, beta, d, z, nq) / fB(z);
            double rBi = convolve_at(fBinv, beta, d, z, nq) / fBinv(z);
            double rk = convolve_at(fk, beta, d, z, nq) / fk(z);
            double rki = convolve_at(fkinv, beta, d, z, nq) / fkinv(z);
            mx[0][lane] = std::max(mx[0][lane], rB);
            mx[1][lane] = std::max(mx[1][lane], rBi);
            mx[2][lane] = std::max(mx[2][lane], rk);
            mx[3][lane] = std::max(mx[3][lane], rki);
        }
    });
    RatioScan out;
    for (int lane = 0; lane < kLanes; ++lane) {
        out.B = std::max(out.B, mx[0][lane]);
        out.B_inv = std::max(out.B_inv, mx[1][lane]);
        out.k = std::max(out.k, mx[2][lane]);
        out.k_inv = std::max(out.k_inv, mx[3][lane]);
    }
    return out;
}

}  // namespace

DominationReport check_mollifier_domination(const CollisionKernel& B, const SpatialKernel& k,
                                            double beta, int d, const DominationParams& p) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error("check_mollifier_domination: beta must be in (0,1)");
    RatioScan coarse = scan(B, k, beta, d, p, p.quad_points);
    RatioScan fine = scan(B, k, beta, d, p, 2 * p.quad_points);

    DominationReport r;
    r.max_ratio_B = fine.B;
    r.max_ratio_B_inv = fine.B_inv;
    r.max_ratio_k = fine.k;
    r.max_ratio_k_inv = fine.k_inv;
    r.max_ratio = fine.overall();
    r.refinement_disagreement =
        std::abs(fine.overall() - coarse.overall()) / std::max(fine.overall(), 1e-300);
    r.quadrature_suspect = r.refinement_disagreement > 0.05;
    r.bound_constant = p.bound_constant;
    r.passed = !r.quadrature_suspect && r.max_ratio <= p.bound_constant;
    return r;
}

}  // namespace fbz
