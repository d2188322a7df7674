#include "doctest.h"

#include <cmath>
#include <random>

#include "rvm/kernels.hpp"

using namespace rvm;

namespace {
const Vec3 kOmega{2.0 / 7, 3.0 / 7, -6.0 / 7};
const Vec3 kV{0.3, -1.2, 2.5};

Vec3 random_unit(std::mt19937_64& g) {
    std::normal_distribution<double> n;
    Vec3 a{n(g), n(g), n(g)};
    return a / norm(a);
}

// central difference of a vector kernel in v_j
template <class F>
Vec3 dv(F f, const Vec3& w, const Vec3& v, int j, double h = 1e-5) {
    Vec3 p = v, m = v;
    p[j] += h;
    m[j] -= h;
    return (f(w, p) - f(w, m)) / (2 * h);
}
}  // namespace

TEST_CASE("kernel values against high-precision reference") {
    // 30-digit evaluation of the closed forms
    CHECK(kernels::retard(kOmega, kV) == doctest::Approx(0.132184890919222375).epsilon(1e-13));
    Vec3 kT = kernels::kT(kOmega, kV);
    CHECK(kT.x == doctest::Approx(2.52236092911610516).epsilon(1e-12));
    CHECK(kT.y == doctest::Approx(0.153776161807211054).epsilon(1e-12));
    CHECK(kT.z == doctest::Approx(-0.0875665519861223092).epsilon(1e-12));
    Vec3 kz = kernels::kz(kOmega, kV);
    CHECK(kz.x == doctest::Approx(2.92741007752678030).epsilon(1e-12));
    CHECK(kz.z == doctest::Approx(-0.101628281575181178).epsilon(1e-12));
    Vec3 kTB = kernels::kTB(kOmega, kV);
    CHECK(kTB.x == doctest::Approx(-0.0942796164121284854).epsilon(1e-12));
    CHECK(kTB.y == doctest::Approx(2.13700463867491234).epsilon(1e-12));
    CHECK(kTB.z == doctest::Approx(1.03707578053341334).epsilon(1e-12));
    CHECK(kernels::a_il(kOmega, kV)[0][0] == doctest::Approx(-13.3704467655297365).epsilon(1e-12));
    CHECK(kernels::a_il(kOmega, kV)[1][2] == doctest::Approx(-0.367025889065653464).epsilon(1e-12));
    CHECK(kernels::d_il(kOmega, kV)[0][1] == doctest::Approx(-8.17802866308409483).epsilon(1e-12));
}

TEST_CASE("static limits") {
    Vec3 w{0, 0.6, 0.8};
    Vec3 kT = kernels::kT(w, {});
    CHECK(norm(kT - w) < 1e-15);
    CHECK(norm(kernels::kTB(w, {})) == 0.0);
    CHECK(norm(kernels::kzB(w, {})) == 0.0);
    Mat3 d = kernels::d_il(w, {});
    CHECK(d[1][2] == doctest::Approx(-w[2] * w[1]));
}

TEST_CASE("source kernels are v-gradients of the data kernels") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int n = 0; n < 50; ++n) {
        Vec3 w = random_unit(g);
        Vec3 v{u(g), u(g), u(g)};
        if (kernels::retard(w, v) < 0.05) continue;
        Mat3 S = kernels::kS(w, v), SB = kernels::kSB(w, v);
        auto gd = kernels::grad_v_d(w, v);
        for (int j = 0; j < 3; ++j) {
            Vec3 fd = dv(kernels::kz, w, v, j);
            Vec3 fdB = dv(kernels::kzB, w, v, j);
            for (int i = 0; i < 3; ++i) {
                CHECK(S[i][j] == doctest::Approx(fd[i]).epsilon(1e-6).scale(1.0));
                CHECK(SB[i][j] == doctest::Approx(fdB[i]).epsilon(1e-6).scale(1.0));
            }
            for (int i = 0; i < 3; ++i)
                for (int l = 0; l < 3; ++l) {
                    Vec3 p = v, m = v;
                    p[j] += 1e-5;
                    m[j] -= 1e-5;
                    double fdd = (kernels::d_il(w, p)[i][l] - kernels::d_il(w, m)[i][l]) / 2e-5;
                    CHECK(gd[i][l][j] == doctest::Approx(fdd).epsilon(1e-5).scale(1.0));
                }
        }
    }
}

TEST_CASE("retardation factor stays accurate against the velocity") {
    Vec3 v{0, 0, 1e3};
    Vec3 w{0, 0, -1};
    double g = std::sqrt(1 + 1e6);
    // 1 - |v|/g = 1/(g (g + |v|))
    CHECK(kernels::retard(w, v) == doctest::Approx(1.0 / (g * (g + 1e3))).epsilon(1e-12));
}

TEST_CASE("kernel bounds hold on a random sample") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0, 1);
    const double cT = 3 * std::sqrt(3.0) / 4;
    for (int n = 0; n < 20000; ++n) {
        Vec3 w = random_unit(g);
        Vec3 v = std::pow(10.0, 3 * u(g)) * u(g) * random_unit(g);
        double gam = lorentz_factor(v);
        CHECK(norm(kernels::kT(w, v)) <= cT * gam);
        CHECK(norm(kernels::kz(w, v)) <= 2 * gam);
        auto gd = kernels::grad_v_d(w, v);
        for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l) CHECK(norm(gd[i][l]) <= 64 * gam * gam * gam);
        Vec3 vh = hat_velocity(v);
        CHECK(norm2(w + vh) <= 2 * kernels::retard(w, v));
    }
}
