#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rvm/density.hpp"
#include "rvm/quadrature.hpp"

using namespace rvm;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<WeightedState> states_of(const std::vector<ParticleEnsemble>& ens) {
    std::vector<WeightedState> s;
    for (const auto& e : ens)
        for (const auto& p : e.particles) s.push_back({p.x, p.v, p.w});
    return s;
}

}  // namespace

TEST_CASE("dyadic partition of unity") {
    std::uint64_t st = 21;
    for (int i = 0; i < 200; ++i) {
        Vec3 x{uniform01(st), uniform01(st), uniform01(st)}, v{uniform01(st), -uniform01(st), uniform01(st)};
        double scale = 40.0 * uniform01(st);
        x *= scale;
        v *= scale;
        double r = std::sqrt(norm2(x) + norm2(v));
        for (int K = 0; K < 10; ++K) {
            double s = 0.0;
            for (int k = 0; k <= K; ++k) s += dyadic_weight(k, x, v);
            if (std::ldexp(1.0, K) >= r) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    Vec3 a{0.3, 0, 0}, b{0, 0.4, 0};
    CHECK(dyadic_weight(0, a, b) == 1.0);
    for (int k = 1; k < 6; ++k) CHECK(dyadic_weight(k, a, b) == 0.0);
    Vec3 c{3, 0, 0}, z{0, 0, 0};
    CHECK(dyadic_weight(0, c, z) == 0.0);
    CHECK(dyadic_weight(1, c, z) == doctest::Approx(psi_tilde(1.5)));
    CHECK(dyadic_weight(2, c, z) == doctest::Approx(1.0 - psi_tilde(1.5)));
}

TEST_CASE("decomposition of the gaussian datum") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    Decomposition dec = decompose(d, 8);
    REQUIRE(dec.components.size() == 8);
    for (const auto& c : dec.components) {
        CHECK(c.sampled_sup <= c.sup_bound);
        if (c.k >= 5) CHECK(c.empty);
    }
    CHECK_FALSE(dec.components[0].empty);
    std::uint64_t st = 4;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        Vec3 x{uniform01(st) - 0.5, uniform01(st) - 0.5, uniform01(st) - 0.5},
            v{uniform01(st) - 0.5, uniform01(st) - 0.5, uniform01(st) - 0.5};
        x *= 6.0;
        v *= 6.0;
        double s = 0.0;
        for (const auto& c : dec.components) s += c(x, v);
        worst = std::max(worst, std::abs(s - d.f0(x, v)));
    }
    CHECK(worst < 1e-12 * d.eps0);
    CHECK_THROWS_AS(decompose(d, 2), TailTooLarge);
}

TEST_CASE("particle sampling: mass, support, determinism") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    Decomposition dec = decompose(d, 4);
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    for (int k = 1; k <= 3; ++k) {
        const DyadicComponent& c = dec.components[k - 1];
        // f0 and the cutoff are radial in (x, v); |S^5| = pi^3
        double mass = GK::integrate(
            [&](double r) { return d.eps0 * std::exp(-r * r) * dyadic_weight(k - 1, {r, 0, 0}, {0, 0, 0}) * std::pow(r, 5); },
            c.r_inner, c.r_outer, 12, 1e-13);
        mass *= std::pow(kPi, 3);
        ParticleEnsemble e = sample_particles(c, 100000, 9);
        CHECK(e.total_weight() == doctest::Approx(mass).epsilon(0.01));
        for (const auto& p : e.particles) CHECK(std::sqrt(norm2(p.x) + norm2(p.v)) <= c.support_radius);
        ParticleEnsemble e2 = sample_particles(c, 100000, 9);
        bool same = true;
        for (std::size_t i = 0; i < e.particles.size(); ++i)
            same = same && e.particles[i].x == e2.particles[i].x && e.particles[i].v == e2.particles[i].v &&
                   e.particles[i].w == e2.particles[i].w;
        CHECK(same);
    }
    CHECK_THROWS_AS(sample_particles(dec.components[0], 10, 1, "sobol"), ConfigError);
}

TEST_CASE("evaluate_density along characteristics") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    ZeroField z;
    Vec3 x{0.4, -0.3, 1.0}, v{0.2, 0.7, -0.5};
    CHECK(evaluate_density(z, d.f0, 0.0, x, v, 1e-9) == d.f0(x, v));
    for (double t : {0.5, 2.0, 5.0}) {
        double ref = d.f0(x - t * hat_velocity(v), v);
        CHECK(evaluate_density(z, d.f0, t, x, v, 1e-10) == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("velocity support radius") {
    CHECK(velocity_support_radius(3, 0.0, 4.0) == 32.0);
    CHECK(velocity_support_radius(3, 0.0) >= std::ldexp(1.0, 4));
    CHECK(velocity_support_radius(4, 0.5) > velocity_support_radius(3, 0.5));
    CHECK(velocity_support_radius(3, 1.0) > velocity_support_radius(3, 0.5));
}

TEST_CASE("charge and current from weighted states") {
    std::vector<WeightedState> one{{{0, 0, 0}, {0, 0, 0}, 2.0}};
    Vec3 x{0.05, 0.02, -0.01};
    ChargeCurrent cc = charge_current(one, x, 0.3);
    CHECK(cc.rho == doctest::Approx(2.0 * wendland(norm(x), 0.3)).epsilon(1e-15));
    CHECK(norm(cc.j) == 0.0);

    // grid sum of rho returns the weight
    std::vector<WeightedState> two{{{0.013, -0.02, 0.007}, {1, 0, 0}, 0.7}, {{0.3, 0.1, -0.2}, {0, 2, 0}, 1.1}};
    const double h = 0.25, dx = h / 16;
    double sum = 0.0;
    for (int i = -40; i <= 40; ++i)
        for (int j = -40; j <= 40; ++j)
            for (int k = -40; k <= 40; ++k) sum += charge_current(two, {i * dx, j * dx, k * dx}, h).rho;
    CHECK(sum * dx * dx * dx == doctest::Approx(1.8).epsilon(1e-3));
}

TEST_CASE("gaussian charge marginal from the sampled ensemble") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    Decomposition dec = decompose(d, 4);
    std::vector<ParticleEnsemble> ens;
    for (const auto& c : dec.components) ens.push_back(sample_particles(c, 100000, 3));
    auto st = states_of(ens);
    for (Vec3 x : {Vec3{0, 0, 0}, Vec3{0.5, 0, 0}, Vec3{0, -0.4, 0.4}}) {
        double rho = charge_current(st, x, 0.2).rho;
        CHECK(rho == doctest::Approx(d.rho0(x)).epsilon(0.02));
    }
}

TEST_CASE("ensemble binary round trip") {
    InitialData d = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    Decomposition dec = decompose(d, 4);
    ParticleEnsemble e = sample_particles(dec.components[1], 50, 5);
    std::stringstream ss;
    write_ensemble(ss, e);
    ParticleEnsemble b = read_ensemble(ss);
    CHECK(b.k == e.k);
    CHECK(b.seed == e.seed);
    REQUIRE(b.particles.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(b.particles[i].x == e.particles[i].x);
        CHECK(b.particles[i].w == e.particles[i].w);
    }
    std::stringstream bad("xx");
    CHECK_THROWS(read_ensemble(bad));
}
