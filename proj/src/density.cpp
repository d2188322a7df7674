#include "rvm/density.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "rvm/binary_io.hpp"
#include "rvm/quadrature.hpp"

namespace rvm {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kS5 = kPi * kPi * kPi;  // area of the unit 5-sphere

double ball6_volume(double r) { return kS5 / 6.0 * std::pow(r, 6); }

double glue(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

// point on the 6D annulus [a,b] from 7 uniforms, uniform in volume
void annulus_point(const double* u, double a, double b, Vec3& x, Vec3& v, double& rho) {
    double g[6], n2 = 0.0;
    for (int i = 0; i < 6; ++i) {
        g[i] = normal_quantile(u[i + 1]);
        n2 += g[i] * g[i];
    }
    double a6 = std::pow(a, 6), b6 = std::pow(b, 6);
    rho = std::pow(a6 + u[0] * (b6 - a6), 1.0 / 6.0);
    double s = rho / std::sqrt(n2);
    x = {s * g[0], s * g[1], s * g[2]};
    v = {s * g[3], s * g[4], s * g[5]};
}
}  // namespace

double psi_tilde(double s) {
    s = std::abs(s);
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    double a = glue(2.0 - s), b = glue(s - 1.0);
    return a / (a + b);
}

double dyadic_weight(int k, const Vec3& x, const Vec3& v) {
    if (k < 0) throw std::invalid_argument("dyadic_weight: k < 0");
    double r = std::sqrt(norm2(x) + norm2(v));
    if (k == 0) return psi_tilde(r);
    return psi_tilde(r / std::ldexp(1.0, k)) - psi_tilde(r / std::ldexp(1.0, k - 1));
}

double DyadicComponent::operator()(const Vec3& x, const Vec3& v) const {
    double w = dyadic_weight(k - 1, x, v);
    return w == 0.0 ? 0.0 : data->f0(x, v) * w;
}

DyadicBounds dyadic_bounds(int k, double K0, double K1a) {
    double l = K0 * std::log(2.0 + K0);
    double p = std::ldexp(1.0, k);
    return {p + l, p + l * l, std::log(1.0 + K1a + K0) + k + 1.0};
}

Decomposition decompose(const InitialData& data, int k_max, double tail_tol) {
    if (k_max < 1) throw ConfigError("k_max must be at least 1");
    Decomposition dec;
    ScrambledHalton qmc(7, 0xd1ad1cULL);
    const std::size_t probe = 4096;
    double u[7];
    auto probe_shell = [&](int k, double& sup, double& mass) {
        double a = k >= 2 ? std::ldexp(1.0, k - 2) : 0.0, b = std::ldexp(1.0, k);
        double acc = 0.0;
        sup = 0.0;
        DyadicComponent c;
        c.k = k;
        c.data = &data;
        for (std::size_t i = 0; i < probe; ++i) {
            qmc.point(i, u);
            Vec3 x, v;
            double rho;
            annulus_point(u, a, b, x, v, rho);
            double f = c(x, v);
            sup = std::max(sup, f);
            acc += f;
        }
        mass = acc / probe * (ball6_volume(b) - ball6_volume(a));
    };
    double peak = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        DyadicComponent c;
        c.k = k;
        c.data = &data;
        c.sup_bound = std::pow(2.0, (2.0 - k) * data.q) * data.eps_hyp;
        c.support_radius = std::ldexp(1.0, k + 1);
        c.r_inner = k >= 2 ? std::ldexp(1.0, k - 2) : 0.0;
        c.r_outer = std::ldexp(1.0, k);
        probe_shell(k, c.sampled_sup, c.mass_estimate);
        peak = std::max(peak, c.sampled_sup);
        dec.components.push_back(c);
    }
    double total = 0.0;
    for (auto& c : dec.components) {
        c.empty = !(c.sampled_sup > 1e-14 * peak);
        total += c.mass_estimate;
    }
    for (int k = k_max + 1; k <= k_max + 40; ++k)
        dec.tail_bound += std::pow(2.0, (2.0 - k) * data.q) * data.eps_hyp * ball6_volume(std::ldexp(1.0, k));
    for (int k = k_max + 1; k <= k_max + 3; ++k) {
        double sup, mass;
        probe_shell(k, sup, mass);
        dec.sampled_tail += mass;
    }
    if (total > 0.0 && dec.sampled_tail > tail_tol * total)
        throw TailTooLarge("sampled density beyond shell k_max exceeds tolerance; increase k_max");
    return dec;
}

double ParticleEnsemble::total_weight() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.w;
    return s;
}

ParticleEnsemble sample_particles(const DyadicComponent& comp, std::size_t N, std::uint64_t seed,
                                  const std::string& sampler) {
    if (N < 1) throw std::invalid_argument("sample_particles: N < 1");
    ParticleEnsemble ens;
    ens.k = comp.k;
    ens.seed = seed;
    ens.particles.reserve(N);
    const double a = comp.r_inner, b = comp.r_outer;
    const double vol = ball6_volume(b) - ball6_volume(a);
    ScrambledHalton qmc(7, seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(comp.k));
    double u[7];
    if (sampler == "uniform") {
        for (std::size_t i = 0; i < N; ++i) {
            qmc.point(i, u);
            Vec3 x, v;
            double rho;
            annulus_point(u, a, b, x, v, rho);
            ens.particles.push_back({x, v, comp(x, v) * vol / static_cast<double>(N)});
        }
        return ens;
    }
    if (sampler != "radial") throw ConfigError("unknown sampler: " + sampler);

    // radial profile: mean of f0_k over fixed directions, binned
    const int nb = 256, nd = 64;
    std::vector<std::array<double, 6>> dirs;
    ScrambledHalton dq(6, 0xa11ce5ULL);
    for (int d = 0; d < nd; ++d) {
        double w[6], g[6], n2 = 0;
        dq.point(d, w);
        for (int i = 0; i < 6; ++i) {
            g[i] = normal_quantile(w[i]);
            n2 += g[i] * g[i];
        }
        std::array<double, 6> e;
        for (int i = 0; i < 6; ++i) e[i] = g[i] / std::sqrt(n2);
        dirs.push_back(e);
    }
    const double dr = (b - a) / nb;
    std::vector<double> prof(nb), volf(nb);
    double psum = 0.0, vsum = 0.0;
    for (int i = 0; i < nb; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
            double r = a + (i + (j + 0.5) / 3.0) * dr;
            double m = 0.0;
            for (const auto& e : dirs) m += comp(Vec3{r * e[0], r * e[1], r * e[2]}, Vec3{r * e[3], r * e[4], r * e[5]});
            acc += std::pow(r, 5) * m / nd;
        }
        prof[i] = acc / 3.0;
        volf[i] = ball6_volume(a + (i + 1) * dr) - ball6_volume(a + i * dr);
        psum += prof[i];
        vsum += volf[i];
    }
    std::vector<double> mass(nb), cdf(nb + 1, 0.0);
    for (int i = 0; i < nb; ++i) {
        mass[i] = (psum > 0.0 ? 0.9 * prof[i] / psum : 0.0) + (psum > 0.0 ? 0.1 : 1.0) * volf[i] / vsum;
        cdf[i + 1] = cdf[i] + mass[i];
    }
    for (auto& c : cdf) c /= cdf[nb];
    for (std::size_t n = 0; n < N; ++n) {
        qmc.point(n, u);
        int bin = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u[0]) - cdf.begin()) - 1;
        bin = std::clamp(bin, 0, nb - 1);
        double pb = cdf[bin + 1] - cdf[bin];
        double frac = pb > 0.0 ? (u[0] - cdf[bin]) / pb : 0.5;
        double rho = a + (bin + std::clamp(frac, 0.0, 1.0)) * dr;
        double g[6], n2 = 0.0;
        for (int i = 0; i < 6; ++i) {
            g[i] = normal_quantile(u[i + 1]);
            n2 += g[i] * g[i];
        }
        double s = rho / std::sqrt(n2);
        Vec3 x{s * g[0], s * g[1], s * g[2]}, v{s * g[3], s * g[4], s * g[5]};
        // density of the point in 6D: (pb/dr) / (|S^5| rho^5)
        double p6 = (pb / dr) / (kS5 * std::pow(rho, 5));
        double f = comp(x, v);
        double w = (f == 0.0 || !(p6 > 0.0)) ? 0.0 : f / (static_cast<double>(N) * p6);
        ens.particles.push_back({x, v, w});
    }
    return ens;
}

double evaluate_density(const FieldOracle& field, const std::function<double(const Vec3&, const Vec3&)>& f_init,
                        double t, const Vec3& x, const Vec3& v, double tol) {
    if (t == 0.0) return f_init(x, v);
    Trajectory tr = integrate_characteristic(field, t, {x, v}, 0.0, tol);
    if (tr.exited || tr.knots.front().s != 0.0) return 0.0;
    const Knot& k0 = tr.knots.front();
    return std::max(0.0, f_init(k0.X, k0.V));
}

double velocity_support_radius(int k, double K0, double C_cfg) {
    if (k < 1 || K0 < 0.0) throw std::invalid_argument("velocity_support_radius: bad arguments");
    return C_cfg * (std::ldexp(1.0, k) + K0 * std::log(2.0 + K0));
}

double wendland(double r, double h) {
    double q = r / h;
    if (q >= 1.0) return 0.0;
    double a = 1.0 - q;
    return 21.0 / (2.0 * kPi * h * h * h) * a * a * a * a * (1.0 + 4.0 * q);
}

ChargeCurrent charge_current(std::span<const WeightedState> states, const Vec3& x, double h) {
    ChargeCurrent cc;
    for (const auto& p : states) {
        double k = wendland(norm(p.x - x), h);
        if (k == 0.0) continue;
        cc.rho += p.w * k;
        cc.j += (p.w * k) * hat_velocity(p.v);
    }
    return cc;
}

double mean_spacing(std::span<const Particle> ps) {
    double W = 0.0;
    Vec3 m;
    for (const auto& p : ps) {
        W += p.w;
        m += p.w * p.x;
    }
    if (!(W > 0.0) || ps.empty()) return 1.0;
    m = m / W;
    double c[3][3] = {};
    for (const auto& p : ps) {
        Vec3 d = p.x - m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) c[i][j] += p.w * d[i] * d[j] / W;
    }
    double det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0]) +
                 c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
    // cube with the same covariance has side sqrt(12) sigma
    double vol = std::pow(12.0, 1.5) * std::sqrt(std::max(det, 0.0));
    return std::cbrt(vol / static_cast<double>(ps.size()));
}

void write_ensemble(std::ostream& os, const ParticleEnsemble& ens, const std::vector<Trajectory>* trajs) {
    binio::put_u64(os, static_cast<std::uint64_t>(ens.k));
    binio::put_u64(os, ens.seed);
    binio::put_u64(os, ens.particles.size());
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
        const auto& p = ens.particles[i];
        binio::put_f64(os, p.w);
        if (trajs) {
            write_trajectory(os, (*trajs)[i]);
        } else {
            Trajectory t0;
            t0.knots.push_back({0.0, p.x, p.v, hat_velocity(p.v), Vec3{}});
            write_trajectory(os, t0);
        }
    }
}

ParticleEnsemble read_ensemble(std::istream& is, std::vector<Trajectory>* trajs) {
    ParticleEnsemble ens;
    ens.k = static_cast<int>(binio::get_u64(is));
    ens.seed = binio::get_u64(is);
    std::uint64_t n = binio::get_u64(is);
    if (n > (1ULL << 34)) throw IoError("implausible particle count in ensemble");
    ens.particles.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        double w = binio::get_f64(is);
        Trajectory tr = read_trajectory(is);
        if (tr.knots.empty()) throw IoError("empty trajectory record in ensemble");
        ens.particles.push_back({tr.knots.front().X, tr.knots.front().V, w});
        if (trajs) trajs->push_back(std::move(tr));
    }
    return ens;
}

}  // namespace rvm
