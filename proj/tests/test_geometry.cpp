#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "fbz/geometry.hpp"

using namespace fbz;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("collide reproduces the hand examples") {
    auto [a1, b1] = collide(vec2(1, 0), vec2(-1, 0), vec2(0, 1), 2);
    CHECK(a1[0] == doctest::Approx(1.0));
    CHECK(b1[0] == doctest::Approx(-1.0));
    CHECK(a1[1] == doctest::Approx(0.0));

    auto [a2, b2] = collide(vec2(1, 0), vec2(-1, 0), vec2(1, 0), 2);
    CHECK(a2[0] == doctest::Approx(-1.0));
    CHECK(b2[0] == doctest::Approx(1.0));

    auto [a3, b3] = collide(vec2(1, 0), vec2(0, 1), vec2(1, 0), 2);
    CHECK(a3[0] == doctest::Approx(0.0));
    CHECK(a3[1] == doctest::Approx(0.0));
    CHECK(b3[0] == doctest::Approx(1.0));
    CHECK(b3[1] == doctest::Approx(1.0));
    // conservation cross-check of the same example
    CHECK(norm2(a3) + norm2(b3) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(a3[0] + b3[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a3[1] + b3[1] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(collide(vec2(1, 0), vec2(0, 1), vec2(2, 0), 2), Error);
}

TEST_CASE("collide involution, conservation and isometry on random triples") {
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        Vec v = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
        Vec vs = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
        double th = rng.uniform(0, 2 * M_PI);
        Vec w = vec2(std::cos(th), std::sin(th));
        auto [vp, vsp] = collide(v, vs, w, 2);
        CHECK(vp[0] + vsp[0] == doctest::Approx(v[0] + vs[0]).epsilon(1e-13));
        CHECK(vp[1] + vsp[1] == doctest::Approx(v[1] + vs[1]).epsilon(1e-13));
        CHECK(norm2(vp) + norm2(vsp) == doctest::Approx(norm2(v) + norm2(vs)).epsilon(1e-13));
        CHECK(norm(vp - vsp) == doctest::Approx(norm(v - vs)).epsilon(1e-12));
        auto [v2, vs2] = collide(vp, vsp, w, 2);
        CHECK(v2[0] == doctest::Approx(v[0]).epsilon(1e-13));
        CHECK(v2[1] == doctest::Approx(v[1]).epsilon(1e-13));
        CHECK(vs2[0] == doctest::Approx(vs[0]).epsilon(1e-13));
        CHECK(vs2[1] == doctest::Approx(vs[1]).epsilon(1e-13));
    }
}

TEST_CASE("circle quadrature: nodes, weights, trig moment") {
    CHECK_THROWS_AS(sphere_quadrature(2, 3), Error);
    SphereQuadrature q4 = sphere_quadrature(2, 4);
    REQUIRE(q4.nodes.size() == 4);
    CHECK(q4.nodes[0][0] == doctest::Approx(1.0));
    CHECK(q4.nodes[1][1] == doctest::Approx(1.0));
    for (double w : q4.weights) CHECK(w == doctest::Approx(M_PI / 2).epsilon(1e-15));

    for (int n : {4, 8, 16, 31}) {
        SphereQuadrature q = sphere_quadrature(2, n);
        double tot = 0.0;
        for (double w : q.weights) tot += w;
        CHECK(tot == doctest::Approx(2 * M_PI).epsilon(1e-13));
    }

    // integral over the circle of <e1, w>^2 equals pi
    SphereQuadrature q8 = sphere_quadrature(2, 8);
    double s = 0.0;
    for (std::size_t m = 0; m < q8.nodes.size(); ++m)
        s += q8.weights[m] * q8.nodes[m][0] * q8.nodes[m][0];
    CHECK(s == doctest::Approx(M_PI).epsilon(1e-13));
}

TEST_CASE("sphere quadrature d=3: measure, antipodal symmetry, quadratic moment") {
    SphereQuadrature q = sphere_quadrature(3, 16);
    double tot = 0.0;
    for (double w : q.weights) tot += w;
    CHECK(tot == doctest::Approx(4 * M_PI).epsilon(1e-12));
    for (const Vec& n : q.nodes) CHECK(norm(n) == doctest::Approx(1.0).epsilon(1e-12));
    // every node has its antipode in the set
    for (const Vec& n : q.nodes) {
        bool found = false;
        for (const Vec& m : q.nodes)
            if (norm(m + n) < 1e-10) found = true;
        CHECK(found);
    }
    double s = 0.0;
    for (std::size_t m = 0; m < q.nodes.size(); ++m)
        s += q.weights[m] * q.nodes[m][0] * q.nodes[m][0];
    CHECK(s == doctest::Approx(4 * M_PI / 3).epsilon(1e-12));
}

namespace {

// independent enumeration: all ordered node 4-tuples, integer conservation
std::set<std::array<int, 4>> brute_force_quads(const VelocityLattice& lat) {
    std::set<std::array<int, 4>> out;
    const int nn = lat.nodes();
    std::vector<std::array<int, 3>> c(nn);
    for (int f = 0; f < nn; ++f) {
        int cc[3] = {0, 0, 0};
        lat.coords(f, cc);
        c[f] = {cc[0], cc[1], cc[2]};
    }
    auto e = [&](int f) {
        int s = 0;
        for (int a = 0; a < lat.d; ++a) s += c[f][a] * c[f][a];
        return s;
    };
    for (int j = 0; j < nn; ++j)
        for (int l = 0; l < nn; ++l)
            for (int jp = 0; jp < nn; ++jp)
                for (int lp = 0; lp < nn; ++lp) {
                    if (jp == j && lp == l) continue;
                    bool mom = true;
                    for (int a = 0; a < lat.d; ++a)
                        if (c[j][a] + c[l][a] != c[jp][a] + c[lp][a]) mom = false;
                    if (!mom) continue;
                    if (e(j) + e(l) != e(jp) + e(lp)) continue;
                    out.insert({j, l, jp, lp});
                }
    return out;
}

}  // namespace

TEST_CASE("DVM table on the 3x3 lattice matches brute-force enumeration") {
    VelocityLattice lat{2, 3, 1.5};  // nodes at -1, 0, 1 per axis
    CollisionKernel flat{0.0, 1.0, nullptr, 0.0};
    DVMTable t = build_dvm_table(lat, flat, 16);

    std::set<std::array<int, 4>> expect = brute_force_quads(lat);
    std::set<std::array<int, 4>> got;
    for (const auto& q : t.quads) got.insert({int(q.j), int(q.l), int(q.jp), int(q.lp)});
    CHECK(got == expect);

    // the classic quadruple (1,0),(-1,0) -> (0,1),(0,-1) is present
    auto flat_of = [&](int x, int y) {
        int c[3] = {x + 1, y + 1, 0};
        return lat.flat(c);
    };
    std::array<int, 4> classic = {flat_of(1, 0), flat_of(-1, 0), flat_of(0, 1), flat_of(0, -1)};
    CHECK(got.count(classic) == 1);
}

TEST_CASE("DVM table: conservation recheck, swap closure, positive weights") {
    VelocityLattice lat{2, 6, 3.0};
    CollisionKernel lin{1.0, 1.0, nullptr, 0.0};
    DVMTable t = build_dvm_table(lat, lin, 16);
    REQUIRE(t.size() > 0);

    std::map<std::array<int, 4>, double> w;
    for (std::size_t q = 0; q < t.size(); ++q) {
        CHECK(t.weight[q] > 0.0);
        const auto& qu = t.quads[q];
        w[{int(qu.j), int(qu.l), int(qu.jp), int(qu.lp)}] = t.weight[q];
        int cj[3], cl[3], cjp[3], clp[3];
        lat.coords(int(qu.j), cj);
        lat.coords(int(qu.l), cl);
        lat.coords(int(qu.jp), cjp);
        lat.coords(int(qu.lp), clp);
        int e = 0, ep = 0;
        for (int a = 0; a < 2; ++a) {
            CHECK(cj[a] + cl[a] == cjp[a] + clp[a]);
            e += cj[a] * cj[a] + cl[a] * cl[a];
            ep += cjp[a] * cjp[a] + clp[a] * clp[a];
        }
        CHECK(e == ep);
    }
    for (const auto& [key, weight] : w) {
        auto rev = std::array<int, 4>{key[2], key[3], key[0], key[1]};
        REQUIRE(w.count(rev) == 1);
        CHECK(w[rev] == doctest::Approx(weight).epsilon(1e-13));
    }
}

TEST_CASE("DVM calibration matches the sphere-quadrature loss on the lattice Gaussian") {
    VelocityLattice lat{2, 8, 4.0};
    CollisionKernel lin{1.0, 1.0, nullptr, 0.0};
    DVMTable t = build_dvm_table(lat, lin, 16);

    const int nn = lat.nodes();
    std::vector<double> g(nn);
    double z = 0.0;
    for (int f = 0; f < nn; ++f) {
        g[f] = std::exp(-0.5 * norm2(lat.velocity(f)));
        z += g[f];
    }
    for (double& v : g) v /= z;
    double loss_dvm = 0.0;
    for (std::size_t q = 0; q < t.size(); ++q)
        loss_dvm += t.weight[q] * g[t.quads[q].j] * g[t.quads[q].l];
    SphereQuadrature sq = sphere_quadrature(2, 16);
    double loss_quad = 0.0;
    for (int j = 0; j < nn; ++j)
        for (int l = 0; l < nn; ++l) {
            double b = 0.0;
            for (std::size_t m = 0; m < sq.nodes.size(); ++m)
                b += sq.weights[m] * eval_B(lin, lat.velocity(j) - lat.velocity(l), sq.nodes[m], 2);
            loss_quad += b * g[j] * g[l];
        }
    CHECK(loss_dvm == doctest::Approx(loss_quad).epsilon(1e-12));
    CHECK(std::abs(loss_dvm / loss_quad - 1.0) < 0.1);
}

TEST_CASE("DVM table file cache round-trips") {
    VelocityLattice lat{2, 4, 2.0};
    CollisionKernel lin{0.5, 1.3, nullptr, 0.0};
    DVMTable t = build_dvm_table(lat, lin, 8);
    std::string path = "/tmp/fbz_test_table.txt";
    save_dvm_table(t, path);
    DVMTable u = load_dvm_table(path);
    REQUIRE(u.size() == t.size());
    CHECK(u.kappa == doctest::Approx(t.kappa).epsilon(1e-15));
    for (std::size_t q = 0; q < t.size(); ++q) {
        CHECK(u.quads[q].j == t.quads[q].j);
        CHECK(u.quads[q].lp == t.quads[q].lp);
        CHECK(u.weight[q] == doctest::Approx(t.weight[q]).epsilon(1e-15));
    }
    std::remove(path.c_str());
}

TEST_CASE("DVM table: lattice too coarse to collide is an error") {
    VelocityLattice lat{2, 1, 1.0};
    CollisionKernel flat{0.0, 1.0, nullptr, 0.0};
    CHECK_THROWS_AS(build_dvm_table(lat, flat, 8), Error);
}

TEST_CASE("truncated-kernel tables: raw weights capped and monotone") {
    VelocityLattice lat{2, 6, 3.0};
    CollisionKernel lin{1.0, 1.0, nullptr, 0.0};
    DVMTable full = build_dvm_table(lat, lin, 16);
    double supb = lin.sup_on_ball(2.0 * std::sqrt(2.0) * lat.vmax);
    DVMTable same = build_dvm_table(lat, truncate_kernel(lin, 10.0 * supb), 16);
    REQUIRE(same.size() == full.size());
    for (std::size_t q = 0; q < full.size(); ++q)
        CHECK(same.raw_weight[q] == doctest::Approx(full.raw_weight[q]).epsilon(1e-14));

    DVMTable halfm = build_dvm_table(lat, truncate_kernel(lin, 0.5 * supb), 16);
    DVMTable quart = build_dvm_table(lat, truncate_kernel(lin, 0.25 * supb), 16);
    for (std::size_t q = 0; q < full.size(); ++q) {
        CHECK(halfm.raw_weight[q] <= full.raw_weight[q] + 1e-14);
        CHECK(quart.raw_weight[q] <= halfm.raw_weight[q] + 1e-14);
    }
}

TEST_SUITE_END();
