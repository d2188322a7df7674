#include "rvm/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rvm/quadrature.hpp"

namespace rvm {

namespace {
constexpr double kPi = std::numbers::pi;

Vec3 unit_axis(int i) { return i == 0 ? Vec3{1, 0, 0} : (i == 1 ? Vec3{0, 1, 0} : Vec3{0, 0, 1}); }

double frob(const Mat3& m) {
    double s = 0;
    for (auto& r : m)
        for (double x : r) s += x * x;
    return std::sqrt(s);
}
double frob(const Tensor3& t) {
    double s = 0;
    for (auto& m : t)
        for (auto& r : m)
            for (double x : r) s += x * x;
    return std::sqrt(s);
}

Vec3 random_unit(std::uint64_t& st) {
    double z = 2.0 * uniform01(st) - 1.0, phi = 2.0 * kPi * uniform01(st);
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

struct AxisPair {
    Vec3 mB, mE;
};

AxisPair axes_for_seed(std::uint64_t seed) {
    if (seed == 0) return {{0, 0, 1}, {1, 0, 0}};
    std::uint64_t st = seed;
    Vec3 a = random_unit(st), b = random_unit(st);
    b = b - dot(a, b) * a;
    return {a, b / norm(b)};
}

// sup over (r, theta) of (1+r)^(2+k) |D^k F| for a unit-amplitude rotational Gaussian
std::array<double, 3> rotational_sups() {
    RotationalGaussian g{1.0, {0, 0, 1}};
    std::array<double, 3> s{0, 0, 0};
    for (int i = 0; i <= 1200; ++i) {
        double r = 6.0 * i / 1200.0;
        for (int j = 0; j <= 48; ++j) {
            double th = 0.5 * kPi * j / 48.0;
            Vec3 x{r * std::sin(th), 0.0, r * std::cos(th)};
            double w = (1 + r) * (1 + r);
            s[0] = std::max(s[0], w * norm(g.field(x)));
            s[1] = std::max(s[1], w * (1 + r) * frob(g.jacobian(x)));
            s[2] = std::max(s[2], w * (1 + r) * (1 + r) * frob(g.hessian(x)));
        }
    }
    for (auto& v : s) v *= 1.02;
    return s;
}

std::array<double, 3> coulomb_sups(const GaussianCoulomb& c) {
    std::array<double, 3> s{0, 0, 0};
    if (c.A == 0.0) return s;
    for (int i = 0; i <= 4000; ++i) {
        double r = 60.0 * i / 4000.0;
        Vec3 x{r, 0, 0};
        double w = (1 + r) * (1 + r);
        s[0] = std::max(s[0], w * norm(c.field(x)));
        s[1] = std::max(s[1], w * (1 + r) * frob(c.jacobian(x)));
        s[2] = std::max(s[2], w * (1 + r) * (1 + r) * frob(c.hessian(x)));
    }
    // tails approach their limits from below; pad for r beyond the scan
    for (auto& v : s) v *= 1.05;
    return s;
}

double hypothesis_constant(double eps0, double q) {
    double best = 0.0;
    for (int i = 0; i <= 20000; ++i) {
        double s = 10.0 * i / 20000.0;
        best = std::max(best, -s * s + q * std::log1p(std::numbers::sqrt2 * s));
    }
    return eps0 * std::exp(best) * (1.0 + 1e-9);
}

}  // namespace

Vec3 hat_velocity(const Vec3& v) { return v / std::sqrt(1.0 + norm2(v)); }

double GaussianCoulomb::G(double u) {
    if (u <= 4.0) {
        double term = 1.0, s = 0.0;
        for (int n = 0; n < 60; ++n) {
            s += term / (2 * n + 3);
            term *= -u / (n + 1);
        }
        return s;
    }
    double r = std::sqrt(u);
    return (0.25 * std::sqrt(kPi) * std::erf(r) - 0.5 * r * std::exp(-u)) / (u * r);
}

double GaussianCoulomb::dG(double u) {
    if (u <= 4.0) {
        // sum_{n>=1} (-1)^n n u^(n-1) / (n! (2n+3))
        double term = -1.0, s = 0.0;  // term = (-1)^n u^(n-1)/(n-1)!
        for (int n = 1; n < 60; ++n) {
            s += term / (2 * n + 3);
            term *= -u / n;
        }
        return s;
    }
    return (std::exp(-u) - 3.0 * G(u)) / (2.0 * u);
}

double GaussianCoulomb::d2G(double u) {
    if (u <= 4.0) {
        double term = 1.0, s = 0.0;  // term = (-1)^n u^(n-2)/(n-2)!
        for (int n = 2; n < 62; ++n) {
            s += term / (2 * n + 3);
            term *= -u / (n - 1);
        }
        return s;
    }
    return (-std::exp(-u) - 5.0 * dG(u)) / (2.0 * u);
}

Vec3 GaussianCoulomb::field(const Vec3& x) const {
    if (A == 0.0) return {};
    return (4.0 * kPi * A * G(norm2(x))) * x;
}

Mat3 GaussianCoulomb::jacobian(const Vec3& x) const {
    Mat3 m{};
    if (A == 0.0) return m;
    double u = norm2(x), g = G(u), g1 = dG(u), c = 4.0 * kPi * A;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = c * ((i == j ? g : 0.0) + 2.0 * g1 * x[i] * x[j]);
    return m;
}

Tensor3 GaussianCoulomb::hessian(const Vec3& x) const {
    Tensor3 t{};
    if (A == 0.0) return t;
    double u = norm2(x), g1 = dG(u), g2 = d2G(u), c = 4.0 * kPi * A;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double d = (i == j ? x[k] : 0.0) + (i == k ? x[j] : 0.0) + (j == k ? x[i] : 0.0);
                t[k][i][j] = c * (2.0 * g1 * d + 4.0 * g2 * x[i] * x[j] * x[k]);
            }
    return t;
}

double GaussianCoulomb::enclosed_charge(double r) const {
    return 4.0 * kPi * A * (0.25 * std::sqrt(kPi) * std::erf(r) - 0.5 * r * std::exp(-r * r));
}

Vec3 RotationalGaussian::field(const Vec3& x) const { return (a * std::exp(-norm2(x))) * cross(m, x); }

Mat3 RotationalGaussian::jacobian(const Vec3& x) const {
    Mat3 J{};
    double phi = a * std::exp(-norm2(x));
    Vec3 mx = cross(m, x);
    for (int j = 0; j < 3; ++j) {
        Vec3 mej = cross(m, unit_axis(j));
        for (int i = 0; i < 3; ++i) J[i][j] = phi * (mej[i] - 2.0 * x[j] * mx[i]);
    }
    return J;
}

Tensor3 RotationalGaussian::hessian(const Vec3& x) const {
    Tensor3 t{};
    double phi = a * std::exp(-norm2(x));
    Vec3 mx = cross(m, x);
    std::array<Vec3, 3> me{cross(m, unit_axis(0)), cross(m, unit_axis(1)), cross(m, unit_axis(2))};
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i)
                t[k][i][j] = phi * (-2.0 * x[k] * me[j][i] - 2.0 * (j == k ? 1.0 : 0.0) * mx[i] -
                                    2.0 * x[j] * me[k][i] + 4.0 * x[j] * x[k] * mx[i]);
    return t;
}

namespace {

InitialData build_scenario(double eps0, double M, double q, std::uint64_t seed) {
    InitialData d;
    d.M = M;
    d.q = q;
    d.eps0 = eps0;
    d.seed = seed;
    d.phase_radius = 8.0;
    GaussianCoulomb coul{eps0 * std::pow(kPi, 1.5)};
    auto rs = rotational_sups();
    auto cs = coulomb_sups(coul);
    double amp = 1e300;
    for (int k = 0; k < 3; ++k) {
        double room = 0.95 * M - cs[k];
        if (room <= 0.0) throw ConfigError("density amplitude too large for the field size M");
        amp = std::min(amp, room / (2.0 * rs[k]));
    }
    auto ax = axes_for_seed(seed);
    RotationalGaussian bext{amp, ax.mB}, eext{amp, ax.mE};

    d.B0 = [bext](const Vec3& x) { return bext.field(x); };
    d.dB0 = [bext](const Vec3& x) { return bext.jacobian(x); };
    d.d2B0 = [bext](const Vec3& x) { return bext.hessian(x); };
    if (eps0 > 0.0) {
        d.E0 = [eext, coul](const Vec3& x) { return eext.field(x) + coul.field(x); };
        d.dE0 = [eext, coul](const Vec3& x) {
            Mat3 a = eext.jacobian(x), b = coul.jacobian(x);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) a[i][j] += b[i][j];
            return a;
        };
        d.d2E0 = [eext, coul](const Vec3& x) {
            Tensor3 a = eext.hessian(x), b = coul.hessian(x);
            for (int k = 0; k < 3; ++k)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) a[k][i][j] += b[k][i][j];
            return a;
        };
        d.f0 = [eps0](const Vec3& x, const Vec3& v) { return eps0 * std::exp(-norm2(x) - norm2(v)); };
        d.f0_space = [eps0](const Vec3& x) { return eps0 * std::exp(-norm2(x)); };
        d.f0_velocity = [](const Vec3& v) { return std::exp(-norm2(v)); };
        d.velocity_isotropic = true;
        double A = coul.A;
        d.rho0 = [A](const Vec3& x) { return A * std::exp(-norm2(x)); };
        d.eps_hyp = hypothesis_constant(eps0, q);
        d.name = "gaussian";
    } else {
        d.E0 = [eext](const Vec3& x) { return eext.field(x); };
        d.dE0 = [eext](const Vec3& x) { return eext.jacobian(x); };
        d.d2E0 = [eext](const Vec3& x) { return eext.hessian(x); };
        d.f0 = [](const Vec3&, const Vec3&) { return 0.0; };
        d.rho0 = [](const Vec3&) { return 0.0; };
        d.eps_hyp = 0.0;
        d.name = "vacuum";
    }
    return d;
}

}  // namespace

InitialData make_gaussian_scenario(double eps0, double M, double q, std::uint64_t seed) {
    if (!(eps0 > 0.0)) throw ConfigError("eps0 must be positive");
    if (!(M > 1.0)) throw ConfigError("M must exceed 1");
    if (!(q > 9.0)) throw ConfigError("q must exceed 9");
    return build_scenario(eps0, M, q, seed);
}

InitialData make_vacuum_scenario(double M, std::uint64_t seed) {
    if (!(M > 1.0)) throw ConfigError("M must exceed 1");
    return build_scenario(0.0, M, 10.0, seed);
}

InitialData make_scenario(const RunConfig& cfg) {
    if (cfg.scenario == "vacuum" || cfg.eps0 == 0.0) {
        InitialData d = make_vacuum_scenario(cfg.M, cfg.seed);
        d.q = cfg.q;
        return d;
    }
    if (cfg.scenario == "gaussian") return make_gaussian_scenario(cfg.eps0, cfg.M, cfg.q, cfg.seed);
    throw ConfigError("unknown scenario: " + cfg.scenario);
}

DecayCheck check_initial_data(const InitialData& data, std::size_t samples, double radius, double fd_h) {
    DecayCheck rep;
    ScrambledHalton qmc(6, 0x5eedULL);
    double pt[6];
    // 8th-order central difference weights for offsets 1..4
    const double c8[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    auto div = [&](const std::function<Vec3(const Vec3&)>& F, const Vec3& x) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) {
            Vec3 e = unit_axis(i);
            for (int m = 1; m <= 4; ++m) s += c8[m - 1] * (F(x + (m * fd_h) * e)[i] - F(x - (m * fd_h) * e)[i]);
        }
        return s / fd_h;
    };
    for (std::size_t n = 0; n < samples; ++n) {
        qmc.point(n, pt);
        Vec3 x{radius * (2 * pt[0] - 1), radius * (2 * pt[1] - 1), radius * (2 * pt[2] - 1)};
        Vec3 v{radius * (2 * pt[3] - 1), radius * (2 * pt[4] - 1), radius * (2 * pt[5] - 1)};
        double r = norm(x);
        double w0 = std::pow(1 + r, 2), w1 = w0 * (1 + r), w2 = w1 * (1 + r);
        double f0v = norm(data.E0(x)) + norm(data.B0(x));
        double f1v = frob(data.dE0(x)) + frob(data.dB0(x));
        double f2v = frob(data.d2E0(x)) + frob(data.d2B0(x));
        double ratio = std::max({w0 * f0v, w1 * f1v, w2 * f2v}) / data.M;
        rep.worst_field_ratio = std::max(rep.worst_field_ratio, ratio);
        bool bad = ratio > 1.0;
        double f = data.f0(x, v);
        if (f < 0.0) bad = true;
        if (data.eps_hyp > 0.0) {
            double dr = f * std::pow(1 + r + norm(v), data.q) / data.eps_hyp;
            rep.worst_density_ratio = std::max(rep.worst_density_ratio, dr);
            if (dr > 1.0) bad = true;
        } else if (f != 0.0) {
            bad = true;
        }
        if (bad) ++rep.violations;
        ++rep.samples;
        // FD constraint checks on a sub-sample near the data scale
        if (n < std::max<std::size_t>(1, samples / 16)) {
            Vec3 xs = (0.5 / std::max(1.0, radius / 4.0)) * x;
            rep.max_div_B = std::max(rep.max_div_B, std::abs(div(data.B0, xs)));
            double rho = data.rho0 ? data.rho0(xs) : 0.0;
            rep.max_gauss_residual = std::max(rep.max_gauss_residual, std::abs(div(data.E0, xs) - 4.0 * kPi * rho));
        }
    }
    return rep;
}

double RunConfig::effective_alpha() const {
    if (alpha > 0.0) return alpha;
    return 0.9 * std::min(beta / 6.0, (q - 9.0) * beta / 2.0);
}

void RunConfig::validate() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(scenario == "gaussian" || scenario == "vacuum", "scenario must be gaussian or vacuum");
    need(q > 9.0, "q must exceed 9");
    need(eps0 >= 0.0, "eps0 must be non-negative");
    need(M > 1.0, "M must exceed 1");
    need(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    double a = effective_alpha();
    need(a > 0.0 && a < std::min(beta / 6.0, (q - 9.0) * beta / 2.0), "alpha outside (0, min(beta/6, (q-9)beta/2))");
    need(Lambda == 0.0 || Lambda > 2.0, "Lambda must exceed 2 (or 0 for automatic sizing)");
    need(particles_per_shell >= 1, "particles_per_shell must be positive");
    need(k_max >= 1, "k_max must be at least 1");
    need(sampler == "radial" || sampler == "uniform", "sampler must be radial or uniform");
    need(t_max > 0.0 && nt >= 2, "time grid needs t_max > 0 and nt >= 2");
    need(box_radius > 0.0 && nx >= 2, "space grid needs box_radius > 0 and nx >= 2");
    need(source_stride >= 1 && (nx - 1) % source_stride == 0 && (nt - 1) % source_stride == 0,
         "source_stride must divide nx-1 and nt-1");
    need(ode_tol > 0.0 && root_tol > 0.0 && r_min >= 0.0, "tolerances must be positive");
    need(sphere_ntheta >= 2 && sphere_nphi >= 3, "sphere rule too small");
    need(vel_nr >= 2 && vel_ntheta >= 2 && vel_nphi >= 3 && vel_radius > 0.0, "velocity rule too small");
    need(support_factor > 0.0, "support_factor must be positive");
    need(max_iter >= 1, "max_iter must be positive");
    need(probes_k0 >= 1 && probes_k1a >= 1, "probe counts must be positive");
    need(decay_samples >= 2 && decay_t_min >= 0.0 && decay_vel_n >= 2, "bad decay sampling");
}

}  // namespace rvm
