#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rvm/fields.hpp"
#include "rvm/kernels.hpp"

using namespace rvm;

namespace {

PushedEnsemble single_particle(const FieldOracle& field, Vec3 x0, Vec3 v0, double w, double t_end, double tol) {
    PushedEnsemble e;
    e.particles.push_back({w, integrate_characteristic(field, 0.0, {x0, v0}, t_end, tol)});
    return e;
}

struct LW {
    Vec3 E, B;
};

// Lienard-Wiechert fields of a charge on a closed-form path (X(s), beta(s), beta'(s))
template <class Path>
LW lienard_wiechert(const Path& path, double w, double t, const Vec3& x) {
    double a = 0.0, b = t;
    for (int i = 0; i < 200; ++i) {
        double m = 0.5 * (a + b);
        if (m + norm(path.X(m) - x) - t < 0)
            a = m;
        else
            b = m;
    }
    double s = 0.5 * (a + b);
    Vec3 d = x - path.X(s);
    double R = norm(d);
    Vec3 n = d / R;
    Vec3 be = path.beta(s), bd = path.beta_dot(s);
    double k = 1 - dot(n, be);
    Vec3 E = w * ((n - be) * ((1 - norm2(be)) / (k * k * k * R * R)) + cross(n, cross(n - be, bd)) / (k * k * k * R));
    return {E, cross(n, E)};
}

struct Gyration {
    Vec3 x0, v0;
    double B0;
    double gam() const { return lorentz_factor(v0); }
    double Om() const { return B0 / gam(); }
    Vec3 V(double s) const {
        double c = std::cos(Om() * s), sn = std::sin(Om() * s);
        // rotation about z by -Om s
        return {c * v0.x + sn * v0.y, -sn * v0.x + c * v0.y, v0.z};
    }
    Vec3 X(double s) const {
        double o = Om(), c = std::cos(o * s), sn = std::sin(o * s);
        Vec3 u = v0 / gam();
        return x0 + Vec3{(sn * u.x + (1 - c) * u.y) / o, (-(1 - c) * u.x + sn * u.y) / o, u.z * s};
    }
    Vec3 beta(double s) const { return V(s) / gam(); }
    Vec3 beta_dot(double s) const { return -Om() * cross(Vec3{0, 0, 1}, beta(s)); }
};

}  // namespace

TEST_CASE("static particle gives the Coulomb field") {
    ZeroField zero;
    std::vector<PushedEnsemble> ens{single_particle(zero, {}, {}, 0.7, 5.0, 1e-10)};
    Vec3 x{1.0, -0.5, 0.25};
    ConeOptions o;
    Vec3 E = cone_field_ET(ens, {3.0, x}, o);
    Vec3 w = -x / norm(x);
    CHECK(norm(E - (-0.7) * w / norm2(x)) < 1e-12);
    CHECK(norm(cone_field_B(ens, {3.0, x}, &zero, o)) < 1e-15);
    CHECK(norm(cone_field_ES(ens, {3.0, x}, zero, o)) == 0.0);
    CHECK(norm(cone_field_ET({}, {3.0, x}, o)) == 0.0);
}

TEST_CASE("uniformly moving charge matches the Lienard-Wiechert field") {
    ZeroField zero;
    Vec3 v0{0.8, 0.3, -0.5};
    std::vector<PushedEnsemble> ens{single_particle(zero, {0.1, 0.2, 0.0}, v0, 1.3, 6.0, 1e-11)};
    struct Line {
        Vec3 x0, u;
        Vec3 X(double s) const { return x0 + s * u; }
        Vec3 beta(double) const { return u; }
        Vec3 beta_dot(double) const { return {}; }
    } line{{0.1, 0.2, 0.0}, hat_velocity(v0)};
    ConeOptions o;
    for (Vec3 x : {Vec3{2, 1, 0}, Vec3{-1, 0.5, 2}, Vec3{0.3, -2, -1}}) {
        LW ref = lienard_wiechert(line, 1.3, 4.0, x);
        Vec3 E = cone_field_ET(ens, {4.0, x}, o);
        Vec3 B = cone_field_B(ens, {4.0, x}, &zero, o);
        CHECK(norm(E - ref.E) <= 1e-8 * norm(ref.E));
        CHECK(norm(B - ref.B) <= 1e-8 * norm(ref.B));
    }
}

TEST_CASE("gyrating charge: transport plus source terms give the radiating field") {
    UniformField Bz({{}, {0, 0, 1.5}});
    Gyration gy{{0.2, -0.1, 0.0}, {1.2, 0.4, 0.3}, 1.5};
    std::vector<PushedEnsemble> ens{single_particle(Bz, gy.x0, gy.v0, 0.9, 8.0, 1e-12)};
    ConeOptions o;
    for (Vec3 x : {Vec3{2.5, 1, 0.5}, Vec3{-1.5, 0.5, 2}, Vec3{0.3, -3, -1}}) {
        LW ref = lienard_wiechert(gy, 0.9, 6.0, x);
        ObserverSet obs{{x}, {6.0}};
        ConeTally tl;
        ConeTerms c;
        accumulate_trajectory(ens[0].particles[0].traj, 0.9, obs, &Bz, o, &c, tl);
        FieldSample k = c.total();
        CHECK(norm(c.ES) > 1e-3 * norm(c.ET));
        CHECK(norm(k.E - ref.E) <= 1e-7 * norm(ref.E));
        CHECK(norm(k.B - ref.B) <= 1e-7 * norm(ref.B));
    }
}

TEST_CASE("cone sums are linear in the weights") {
    UniformField Bz({{0.1, 0, 0}, {0, 0, 1.0}});
    auto a = single_particle(Bz, {0.3, 0, 0}, {0.5, 0.5, 0}, 1.0, 4.0, 1e-10);
    auto b = a;
    b.particles[0].w = 2.5;
    ConeOptions o;
    SpacetimePoint p{3.0, {1, 1, 0}};
    Vec3 ea = cone_field_ES({a}, p, Bz, o), eb = cone_field_ES({b}, p, Bz, o);
    CHECK(norm(eb - 2.5 * ea) <= 1e-14 * norm(eb));
}

TEST_CASE("r_min drops and tallies near-tip crossings") {
    ZeroField zero;
    std::vector<PushedEnsemble> ens{single_particle(zero, {}, {}, 0.5, 3.0, 1e-10)};
    ConeOptions o;
    o.r_min = 0.1;
    ConeTally tl;
    Vec3 E = cone_field_ET(ens, {2.0, {0.05, 0, 0}}, o, &tl);
    CHECK(norm(E) == 0.0);
    CHECK(tl.dropped == 1);
    CHECK(tl.dropped_weight == 0.5);
}

TEST_CASE("observer sets reuse brackets without changing the result") {
    UniformField Bz({{}, {0, 0, 2.0}});
    auto e = single_particle(Bz, {0.2, 0, 0}, {1.0, 0.2, 0.1}, 1.0, 10.0, 1e-11);
    ObserverSet obs;
    obs.xs = {{1, 0, 0}, {0, 2, 1}};
    for (int i = 0; i <= 20; ++i) obs.ts.push_back(0.5 * i);
    ConeOptions o;
    auto all = cone_fields(std::vector<PushedEnsemble>{e}, &Bz, obs, o, nullptr, 1);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        SpacetimePoint p = obs.at(i);
        Vec3 ref = cone_field_ES({e}, p, Bz, o);
        CHECK(norm(all[i].ES - ref) <= 1e-12 * (1 + norm(ref)));
    }
}

TEST_CASE("streaming and pre-pushed cone sums agree") {
    UniformField K({{0.05, 0, 0}, {0, 0.3, 1.0}});
    ParticleEnsemble pe;
    pe.particles = {{{0.1, 0, 0}, {0.4, 0, 0.2}, 0.3}, {{-0.3, 0.2, 0.1}, {0, -0.6, 0.1}, 0.7}};
    ObserverSet obs{{{1, 0.5, 0}, {-1, 0, 1}}, {0.5, 1.5, 2.5}};
    ConeOptions o;
    o.ode_tol = 1e-10;
    auto s = cone_fields(std::vector<ParticleEnsemble>{pe}, K, &K, obs, o, nullptr, 2);
    PushedEnsemble pu = push_ensemble(pe, K, 2.5, 1e-10, 1);
    auto p = cone_fields(std::vector<PushedEnsemble>{pu}, &K, obs, o, nullptr, 1);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(norm(s[i].total().E - p[i].total().E) <= 1e-12 * (1 + norm(p[i].total().E)));
        CHECK(norm(s[i].total().B - p[i].total().B) <= 1e-12 * (1 + norm(p[i].total().B)));
    }
}

TEST_CASE("field cache: nodes, interpolation order, zero cache, I/O") {
    GridSpec g{0.0, 2.0, 5, 1.0, 5};
    FieldCache zero(g);
    CHECK(magnitude(zero.sample(1.3, {0.2, -0.7, 0.1})) == 0.0);

    auto analytic = [](const SpacetimePoint& p) {
        return FieldSample{{std::sin(p.x.x + p.t), std::cos(p.x.y), p.x.z * p.x.x},
                           {std::exp(-p.t) * p.x.y, 0.0, std::sin(p.x.z)}};
    };
    FieldCache c = build_field_cache(analytic, g, 1);
    for (std::size_t i = 0; i < g.nodes(); i += 7) {
        SpacetimePoint p = g.node(i);
        FieldSample a = c.sample(p.t, p.x), b = c.node_value(i);
        CHECK(a.E == b.E);
        CHECK(a.B == b.B);
    }
    auto err = [&](int n) {
        GridSpec gg{0.0, 2.0, n, 1.0, n};
        FieldCache cc = build_field_cache(analytic, gg, 1);
        double e = 0;
        for (int i = 0; i < 200; ++i) {
            SpacetimePoint p{2.0 * std::fmod(0.618 * i, 1.0),
                             {2 * std::fmod(0.754 * i, 1.0) - 1, 2 * std::fmod(0.569 * i, 1.0) - 1,
                              2 * std::fmod(0.371 * i, 1.0) - 1}};
            e = std::max(e, magnitude(cc.sample(p.t, p.x) - analytic(p)));
        }
        return e;
    };
    double e1 = err(9), e2 = err(17);
    CHECK(std::log2(e1 / e2) > 1.7);

    std::string path = "field_cache_test.bin";
    c.iterate = 3;
    c.K0 = 1.25;
    c.write(path);
    FieldCache r = FieldCache::read(path);
    CHECK(r.raw() == c.raw());
    CHECK(r.iterate == 3);
    CHECK(r.K0 == 1.25);
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << "garbage";
    }
    CHECK_THROWS_AS(FieldCache::read(path), IoError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(c.sample(1.0, {3, 0, 0}), DomainError);
}

TEST_CASE("build_field_cache reports the failing node") {
    GridSpec g{0.0, 1.0, 2, 1.0, 2};
    auto bad = [](const SpacetimePoint& p) -> FieldSample {
        if (p.t > 0.5 && p.x.x > 0) return {{std::nan(""), 0, 0}, {}};
        return {};
    };
    CHECK_THROWS_AS(build_field_cache(bad, g, 1), NodeFailure);
}

TEST_CASE("Kirchhoff: t = 0 reproduces the data, rules agree") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 0);
    Vec3 x{0.4, -0.3, 1.1};
    FieldSample k0 = kirchhoff_linear(d, 0.0, x, {});
    CHECK(k0.E == d.E0(x));
    CHECK(k0.B == d.B0(x));
    for (double t : {0.7, 3.0, 9.0}) {
        FieldSample a = kirchhoff_linear(d, t, x, {24, 48, true});
        FieldSample b = kirchhoff_linear(d, t, x, {160, 64, false});
        CHECK(magnitude(a - b) <= 1e-6 * (1e-3 + magnitude(b)));
    }
}

TEST_CASE("sphere integral bound: closed forms") {
    const double pi = 3.14159265358979323846;
    for (double t : {0.5, 2.0, 10.0}) {
        double I = sphere_integral_decay(2, t, {}, 1e-13);
        CHECK(I == doctest::Approx(4 * pi * t * t / ((1 + t) * (1 + t))).epsilon(1e-13));
        CHECK(I <= sphere_integral_bound(2, t, 0.0));
    }
    double I = sphere_integral_decay(2, 10.0, {5, 0, 0});
    CHECK(I <= 8 * pi * 100 / (16 * 6));
    // closed form: 2 pi t/r [ln(1+l) + 1/(1+l)] between |t-r| and t+r
    auto F = [](double l) { return std::log1p(l) + 1 / (1 + l); };
    CHECK(I == doctest::Approx(2 * pi * 10 / 5 * (F(15) - F(5))).epsilon(1e-12));
    CHECK(sphere_integral_decay(3, 0.0, {1, 0, 0}) == 0.0);
    SphereBoundReport rep = sphere_integral_bound_check({{0.0, {1, 0, 0}, 2}, {3.0, {1, 2, 0}, 3}}, 1e-4, {});
    CHECK(rep.checked == 1);
    CHECK(rep.violations == 0);
}

TEST_CASE("surface terms: zero data, factorized path, majorant") {
    InitialData vac = make_vacuum_scenario(1.5, 0);
    SurfaceTerms sv(vac, {}, {});
    CHECK(magnitude(sv(2.0, {1, 0, 0})) == 0.0);

    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 0);
    SurfaceTerms s(d, {24, 48, true}, {6.0, 16, 12, 24});
    for (Vec3 x : {Vec3{0.5, 0.2, -0.3}, Vec3{2, -1, 0.5}}) {
        for (double t : {0.5, 1.5, 3.0}) {
            FieldSample f = s(t, x), p = s.product(t, x);
            CHECK(norm(f.E - p.E) <= 1e-6 * norm(p.E));
            CHECK(norm(p.B) <= 1e-6 * norm(p.E));
            CHECK(norm(p.E) <= s.majorant(t, x));
        }
    }
}

TEST_CASE("assemble_field superposition") {
    FieldSample lin{{1, 0, 0}, {0, 1, 0}};
    ConeTerms c;
    c.ET = {0, 0, 1};
    c.BS = {2, 0, 0};
    FieldSample k = assemble_field(lin, {}, c);
    CHECK(k.E == Vec3{1, 0, 1});
    CHECK(k.B == Vec3{2, 1, 0});
    CHECK(magnitude(assemble_field({}, {}, {})) == 0.0);
}

TEST_CASE("gradient decomposition: no field gives no source term") {
    ZeroField zero;
    std::vector<PushedEnsemble> ens{single_particle(zero, {0.2, 0, 0}, {0.3, 0.1, 0}, 1.0, 3.0, 1e-10)};
    auto dens = [](double, const Vec3&, const Vec3&) { return 0.0; };
    auto g = gradient_decomposition_ET(ens, {2.0, {0.5, 0.5, 0}}, nullptr, 0.2, 2.0, dens, {8, 8, true},
                                       {2.0, 4, 4, 4}, {});
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) {
            CHECK(g.ATS[i][l] == 0.0);
            CHECK(g.Aw[i][l] == 0.0);
        }
    CHECK(g.tally.crossings == 1);
}
