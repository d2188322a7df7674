#include "rvm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "rvm/characteristics.hpp"
#include "rvm/iteration.hpp"
#include "rvm/kernels.hpp"
#include "rvm/parallel.hpp"
#include "rvm/quadrature.hpp"

namespace rvm {

namespace {
constexpr double kPi = std::numbers::pi;

// orthonormal frame (e1, e2, n)
void frame(const Vec3& n, Vec3& e1, Vec3& e2) {
    Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    e1 = cross(n, a);
    e1 = e1 / norm(e1);
    e2 = cross(n, e1);
}

Vec3 in_frame(const Vec3& p, const Vec3& e1, const Vec3& e2, const Vec3& n) { return p.x * e1 + p.y * e2 + p.z * n; }

// x sin(a)/a and x (1 - cos a)/a, accurate for small a
double sinc_scaled(double a, double x) { return std::abs(a) < 1e-6 ? x * (1.0 - a * a / 6.0) : x * std::sin(a) / a; }
double cosc_scaled(double a, double x) {
    return std::abs(a) < 1e-6 ? x * (0.5 * a - a * a * a / 24.0) : x * (1.0 - std::cos(a)) / a;
}
}  // namespace

void OracleConfig::validate() const {
    if (cone_nr < 1 || ball_ns < 1 || cone_sphere.ntheta < 1 || cone_sphere.nphi < 1 || ball_sphere.ntheta < 1 ||
        ball_sphere.nphi < 1 || cone_vel.nr < 1 || ball_vel.nr < 1)
        throw ConfigError("oracle: node counts must be positive");
    if (!(cone_vel.radius > 0.0) || !(ball_vel.radius > 0.0) || !(fd_h > 0.0) || !(fd_dt > 0.0) ||
        mc_samples == 0 || !(rel_tol > 0.0) || r_min < 0.0)
        throw ConfigError("oracle: spacings, radii, sample counts and tolerances must be positive");
}

DensityFn gyration_density(std::function<double(const Vec3&, const Vec3&)> f_init, double Bz) {
    return [f = std::move(f_init), Bz](double tau, const Vec3& y, const Vec3& v) {
        // dV/ds = vhat x (0,0,Bz): V_perp turns by -Bz s / gamma
        const double g = lorentz_factor(v);
        const double a = Bz * tau / g;
        const double c = std::cos(a), s = std::sin(a);
        Vec3 v0{c * v.x - s * v.y, s * v.x + c * v.y, v.z};
        // int_0^tau R(-Bz s/g) ds applied to V0_perp
        double si = sinc_scaled(a, tau), co = cosc_scaled(a, tau);
        Vec3 disp{(si * v0.x + co * v0.y) / g, (-co * v0.x + si * v0.y) / g, tau * v.z / g};
        return f(y - disp, v0);
    };
}

ChargeCurrent velocity_moments(const DensityFn& density, double t, const Vec3& x, const VelocityConfig& vel) {
    BallRule b = ball_rule(vel.radius, vel.nr, vel.ntheta, vel.nphi);
    ChargeCurrent cc;
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        double f = density(t, x, b.points[i]);
        if (f == 0.0) continue;
        cc.rho += b.weights[i] * f;
        cc.j += (b.weights[i] * f) * hat_velocity(b.points[i]);
    }
    return cc;
}

ConeTerms cone_quadrature_oracle(const DensityFn& density, const FieldOracle* K_prev, const SpacetimePoint& obs,
                                 const OracleConfig& cfg, int workers) {
    cfg.validate();
    ConeTerms out;
    if (obs.t <= cfg.r_min) return out;
    const GaussLegendre gr = gauss_legendre(cfg.cone_nr, cfg.r_min, obs.t);
    const SphereRule sr = sphere_rule(cfg.cone_sphere.ntheta, cfg.cone_sphere.nphi);
    const BallRule ball = ball_rule(cfg.cone_vel.radius, cfg.cone_vel.nr, cfg.cone_vel.ntheta, cfg.cone_vel.nphi);
    const std::size_t nd = sr.dirs.size();
    std::vector<ConeTerms> part(gr.nodes.size() * nd);
    parallel_for(part.size(), workers, [&](std::size_t q) {
        const double r = gr.nodes[q / nd];
        const Vec3& w = sr.dirs[q % nd];
        const double tau = obs.t - r;
        const Vec3 y = obs.x + r * w;
        FieldSample K;
        if (K_prev) K = K_prev->sample(tau, y);
        // velocity ball with its pole along omega
        Vec3 e1, e2;
        frame(w, e1, e2);
        ConeTerms c;
        for (std::size_t i = 0; i < ball.points.size(); ++i) {
            Vec3 v = in_frame(ball.points[i], e1, e2, w);
            double f = density(tau, y, v);
            if (f == 0.0) continue;
            double wf = ball.weights[i] * f;
            c.ET -= wf * kernels::kT(w, v);
            c.BT -= wf * kernels::kTB(w, v);
            if (K_prev) {
                Vec3 F = force(K, v);
                c.ES -= (wf * r) * mul(kernels::kS(w, v), F);
                c.BS += (wf * r) * mul(kernels::kSB(w, v), F);
            }
        }
        double s = gr.weights[q / nd] * sr.weights[q % nd];
        part[q].ET = s * c.ET;
        part[q].BT = s * c.BT;
        part[q].ES = s * c.ES;
        part[q].BS = s * c.BS;
    });
    for (const auto& p : part) out += p;
    return out;
}

double shell_mass_in_ball(const DyadicComponent& comp, const Vec3& x, double t, const OracleConfig& cfg,
                          int workers) {
    cfg.validate();
    if (comp.empty || t <= 0.0) return 0.0;
    const double rho_max = std::min(comp.r_outer, comp.data->phase_radius);
    const double rho_in = std::min(comp.r_inner, rho_max);
    const SphereRule sr = sphere_rule(cfg.ball_sphere.ntheta, cfg.ball_sphere.nphi);
    const SphereRule vr = sphere_rule(cfg.ball_vel.ntheta, cfg.ball_vel.nphi);
    const GaussLegendre g01 = gauss_legendre(cfg.ball_ns, 0.0, 1.0);
    const GaussLegendre v01 = gauss_legendre(cfg.ball_vel.nr, 0.0, 1.0);
    std::vector<double> part(sr.dirs.size(), 0.0);
    parallel_for(sr.dirs.size(), workers, [&](std::size_t d) {
        const Vec3& w = sr.dirs[d];
        // ray x + s w inside |y| <= rho_max
        double b = dot(x, w), c = norm2(x) - rho_max * rho_max;
        double disc = b * b - c;
        if (disc <= 0.0) return;
        double s0 = std::max(0.0, -b - std::sqrt(disc)), s1 = std::min(t, -b + std::sqrt(disc));
        if (s1 <= s0) return;
        double acc = 0.0;
        for (int i = 0; i < cfg.ball_ns; ++i) {
            double s = s0 + (s1 - s0) * g01.nodes[i];
            Vec3 y = x + s * w;
            double y2 = norm2(y);
            double v_lo = std::sqrt(std::max(0.0, rho_in * rho_in - y2));
            double v_hi = std::sqrt(std::max(0.0, rho_max * rho_max - y2));
            if (v_hi <= v_lo) continue;
            double inner = 0.0;
            for (int m = 0; m < cfg.ball_vel.nr; ++m) {
                double vr_ = v_lo + (v_hi - v_lo) * v01.nodes[m];
                double sph = 0.0;
                for (std::size_t n = 0; n < vr.dirs.size(); ++n) sph += vr.weights[n] * comp(y, vr_ * vr.dirs[n]);
                inner += v01.weights[m] * vr_ * vr_ * sph;
            }
            acc += g01.weights[i] * s * s * inner * (v_hi - v_lo);
        }
        part[d] = sr.weights[d] * acc * (s1 - s0);
    });
    double m = 0.0;
    for (double p : part) m += p;
    return m;
}

MomentumCheck momentum_conservation_check(const PushedEnsemble& ens, const DyadicComponent& comp,
                                          const SpacetimePoint& obs, const OracleConfig& cfg, int workers) {
    MomentumCheck mc;
    if (obs.t > 0.0) {
        int nw = std::max(1, workers);
        std::vector<double> sums(nw, 0.0);
        std::vector<std::size_t> counts(nw, 0);
        parallel_chunks(ens.particles.size(), nw, [&](int wk, std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const auto& p = ens.particles[i];
                if (p.w == 0.0 || p.traj.knots.empty()) continue;
                Intersection hit = retarded_intersection(p.traj, obs, 1e-12);
                if (!hit.found) continue;
                sums[wk] += p.w;
                ++counts[wk];
            }
        });
        for (int w = 0; w < nw; ++w) {
            mc.lhs += sums[w];
            mc.crossings += counts[w];
        }
        mc.rhs = shell_mass_in_ball(comp, obs.x, obs.t, cfg, workers);
    }
    double scale = std::max(std::abs(mc.lhs), std::abs(mc.rhs));
    mc.rel_err = scale > 0.0 ? std::abs(mc.lhs - mc.rhs) / std::abs(mc.rhs > 0.0 ? mc.rhs : scale) : 0.0;
    return mc;
}

ResidualNorms maxwell_residual(const FieldOracle& field, const SourceFn& sources,
                               std::span<const SpacetimePoint> probes, const Stencil& st, int workers) {
    if (!(st.h > 0.0) || !(st.dt > 0.0)) throw ConfigError("stencil spacings must be positive");
    if (const auto* fc = dynamic_cast<const FieldCache*>(&field)) {
        if (st.h < 2.0 * fc->grid().dx() * (1.0 - 1e-12) || st.dt < 2.0 * fc->grid().dt() * (1.0 - 1e-12))
            throw ConfigError("stencil spacing must be at least twice the cache spacing");
    }
    ResidualNorms out;
    out.probes = probes.size();
    std::vector<std::array<double, 4>> res(probes.size());
    parallel_for(probes.size(), workers, [&](std::size_t q) {
        const double t = probes[q].t;
        const Vec3 x = probes[q].x;
        FieldSample tp = field.sample(t + st.dt, x), tm = field.sample(t - st.dt, x);
        Mat3 JE{}, JB{};
        for (int a = 0; a < 3; ++a) {
            Vec3 e{};
            e[a] = st.h;
            FieldSample p1 = field.sample(t, x + e), p2 = field.sample(t, x + 2.0 * e);
            FieldSample m1 = field.sample(t, x - e), m2 = field.sample(t, x - 2.0 * e);
            for (int i = 0; i < 3; ++i) {
                JE[i][a] = (-p2.E[i] + 8.0 * p1.E[i] - 8.0 * m1.E[i] + m2.E[i]) / (12.0 * st.h);
                JB[i][a] = (-p2.B[i] + 8.0 * p1.B[i] - 8.0 * m1.B[i] + m2.B[i]) / (12.0 * st.h);
            }
        }
        auto curl = [](const Mat3& J) { return Vec3{J[2][1] - J[1][2], J[0][2] - J[2][0], J[1][0] - J[0][1]}; };
        Vec3 dtE = (tp.E - tm.E) / (2.0 * st.dt), dtB = (tp.B - tm.B) / (2.0 * st.dt);
        ChargeCurrent cc = sources ? sources(t, x) : ChargeCurrent{};
        res[q][0] = norm(dtE - curl(JB) + 4.0 * kPi * cc.j);
        res[q][1] = std::abs(JE[0][0] + JE[1][1] + JE[2][2] - 4.0 * kPi * cc.rho);
        res[q][2] = norm(dtB + curl(JE));
        res[q][3] = std::abs(JB[0][0] + JB[1][1] + JB[2][2]);
    });
    for (const auto& r : res)
        for (int i = 0; i < 4; ++i) {
            out.max[i] = std::max(out.max[i], r[i]);
            out.mean[i] += r[i];
        }
    if (!res.empty())
        for (double& m : out.mean) m /= static_cast<double>(res.size());
    return out;
}

MeasureEstimate schaeffer_measure_check(double P, double delta, std::size_t samples, const Vec3& v_center,
                                        std::uint64_t seed) {
    if (P < 1.0 || !(delta > 0.0) || norm(v_center) > P * (1.0 + 1e-12) || samples == 0)
        throw ConfigError("measure check: need P >= 1, delta > 0, |v| <= P, samples > 0");
    MeasureEstimate est;
    const Vec3 vh = hat_velocity(v_center);
    const double a = norm(vh);
    // sampling region: radial shell [w_lo, P] x polar cap around vhat
    double w_lo = 0.0, cmin = -1.0;
    Vec3 n{0, 0, 1};
    if (a > 0.0) n = vh / a;
    if (delta < a) {
        cmin = std::sqrt(1.0 - (delta / a) * (delta / a));
        double u = a - delta;
        w_lo = std::min(P, u / std::sqrt(1.0 - u * u));
    }
    if (a == 0.0 && delta < 1.0) {
        // S is the ball |w| <= delta / sqrt(1 - delta^2); sample a ball just containing it
        w_lo = 0.0;
    }
    double w_hi = P;
    if (a == 0.0 && delta < 1.0) w_hi = std::min(P, delta / std::sqrt(1.0 - delta * delta) * (1.0 + 1e-9));
    Vec3 e1, e2;
    frame(n, e1, e2);
    const double vol = (w_hi * w_hi * w_hi - w_lo * w_lo * w_lo) / 3.0 * 2.0 * kPi * (1.0 - cmin);
    std::uint64_t st = seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL;
    std::size_t hits = 0;
    const double l3 = w_lo * w_lo * w_lo, h3 = w_hi * w_hi * w_hi;
    for (std::size_t i = 0; i < samples; ++i) {
        double r = std::cbrt(l3 + uniform01(st) * (h3 - l3));
        double c = cmin + (1.0 - cmin) * uniform01(st);
        double ph = 2.0 * kPi * uniform01(st);
        double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        Vec3 w = r * in_frame({s * std::cos(ph), s * std::sin(ph), c}, e1, e2, n);
        if (norm(vh - hat_velocity(w)) <= delta) ++hits;
    }
    double p = static_cast<double>(hits) / samples;
    est.mu = vol * p;
    est.stderr_mu = vol * std::sqrt(p * (1.0 - p) / samples);
    est.ratio = est.mu / (std::pow(P, 5) * delta * delta * delta);
    return est;
}

double schaeffer_measure_grid(double P, double delta, const Vec3& v_center, int n) {
    if (n < 2) throw ConfigError("grid count: n < 2");
    const Vec3 vh = hat_velocity(v_center);
    const double a = norm(vh);
    Vec3 nz{0, 0, 1};
    if (a > 0.0) nz = vh / a;
    Vec3 e1, e2;
    frame(nz, e1, e2);
    // box in the (e1, e2, nz) frame containing S
    double lo[3] = {-P, -P, -P}, hi[3] = {P, P, P};
    if (delta < a) {
        double sn = delta / a;
        double u = a - delta;
        double w_lo = std::min(P, u / std::sqrt(1.0 - u * u));
        lo[0] = lo[1] = -P * sn;
        hi[0] = hi[1] = P * sn;
        lo[2] = w_lo * std::sqrt(1.0 - sn * sn);
    } else if (a == 0.0 && delta < 1.0) {
        double rb = std::min(P, delta / std::sqrt(1.0 - delta * delta));
        for (int d = 0; d < 3; ++d) {
            lo[d] = -rb * (1.0 + 1e-9);
            hi[d] = rb * (1.0 + 1e-9);
        }
    }
    double h[3];
    for (int d = 0; d < 3; ++d) h[d] = (hi[d] - lo[d]) / n;
    std::size_t count = 0;
    const double P2 = P * P;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec3 p{lo[0] + (i + 0.5) * h[0], lo[1] + (j + 0.5) * h[1], lo[2] + (k + 0.5) * h[2]};
                Vec3 w = in_frame(p, e1, e2, nz);
                if (norm2(w) <= P2 && norm(vh - hat_velocity(w)) <= delta) ++count;
            }
    return count * h[0] * h[1] * h[2];
}

DecayFit decay_fit(const std::vector<std::pair<double, double>>& series, double t_lo, double t_hi) {
    std::vector<double> X, Y;
    for (const auto& [t, v] : series) {
        if (t < t_lo || t > t_hi) continue;
        if (!(v > 0.0) || !std::isfinite(v)) throw NumericalError("decay fit: non-positive value at t = " + std::to_string(t));
        X.push_back(std::log1p(t));
        Y.push_back(std::log(v));
    }
    if (X.size() < 8) throw NumericalError("decay fit: fewer than 8 points in the window");
    const double n = static_cast<double>(X.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("decay fit: window has no spread in t");
    DecayFit fit;
    fit.points = X.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double e = Y[i] - fit.intercept - fit.slope * X[i];
        sse += e * e;
    }
    double se = std::sqrt(sse / (n - 2.0) / sxx);
    boost::math::students_t dist(n - 2.0);
    fit.width = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
    return fit;
}

double density_at(const FieldOracle& field, const InitialData& data, double t, const Vec3& x, int vel_n,
                  double tol) {
    if (!data.has_density()) return 0.0;
    double radius = std::min(data.phase_radius, data.phase_radius / std::sqrt(1.0 + t * t) * 1.5);
    BallRule b = ball_rule(radius, vel_n, std::max(4, vel_n / 2), vel_n);
    double rho = 0.0;
    for (std::size_t i = 0; i < b.points.size(); ++i)
        rho += b.weights[i] * evaluate_density(field, data.f0, t, x, b.points[i], tol);
    return rho;
}

std::vector<std::pair<double, double>> density_series(const FieldOracle& field, const InitialData& data,
                                                      const std::vector<double>& ts, const Vec3& x, int vel_n,
                                                      double tol, int workers) {
    std::vector<std::pair<double, double>> out(ts.size());
    parallel_for(ts.size(), workers, [&](std::size_t i) { out[i] = {ts[i], density_at(field, data, ts[i], x, vel_n, tol)}; });
    return out;
}

KernelBoundReport kernel_bound_check(std::size_t samples, double v_max, std::uint64_t seed) {
    KernelBoundReport rep;
    rep.samples = samples;
    const double cT = 3.0 * std::sqrt(3.0) / 4.0;
    std::uint64_t st = seed ^ 0xA5A5A5A55A5A5A5AULL;
    auto unit = [&]() {
        double z = 2.0 * uniform01(st) - 1.0, ph = 2.0 * kPi * uniform01(st);
        double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        return Vec3{s * std::cos(ph), s * std::sin(ph), z};
    };
    const double lmax = std::log10(v_max);
    for (std::size_t n = 0; n < samples; ++n) {
        Vec3 dir = unit();
        double speed = std::pow(10.0, -3.0 + (lmax + 3.0) * uniform01(st));
        Vec3 v = speed * dir;
        Vec3 w;
        if (n % 2 == 0) {
            w = unit();
        } else {
            // omega close to -vhat, where 1 + vhat.omega is smallest
            Vec3 p = unit();
            double eps = std::pow(10.0, -4.0 * uniform01(st));
            w = -dir + eps * p;
            w = w / norm(w);
        }
        const double g = lorentz_factor(v);
        const double r[4] = {
            norm(kernels::kT(w, v)) / (cT * g),
            norm(kernels::kz(w, v)) / (2.0 * g),
            [&] {
                auto gd = kernels::grad_v_d(w, v);
                double s2 = 0.0;
                for (int i = 0; i < 3; ++i)
                    for (int l = 0; l < 3; ++l) s2 += norm2(gd[i][l]);
                return std::sqrt(s2) / (64.0 * g * g * g);
            }(),
            norm2(w + hat_velocity(v)) / (2.0 * kernels::retard(w, v)),
        };
        for (int i = 0; i < 4; ++i) {
            rep.worst_ratio[i] = std::max(rep.worst_ratio[i], r[i]);
            if (!(r[i] <= 1.0)) ++rep.violations[i];
        }
    }
    return rep;
}

namespace {

bool selected(const std::string& filter, const std::string& id) {
    if (filter.empty()) return true;
    std::stringstream ss(filter);
    std::string item;
    while (std::getline(ss, item, ','))
        if (item == id) return true;
    return false;
}

Json vec_json(const Vec3& a) { return Json::array({a.x, a.y, a.z}); }
Json point_json(double t, const Vec3& x) { return Json{{"t", t}, {"x", vec_json(x)}}; }

struct Shell {
    int k = 0;
    const DyadicComponent* comp = nullptr;
    const PushedEnsemble* pushed = nullptr;
    double fnorm = 0.0;
    DyadicBounds L;
};

// running sup with a witness and a half-sample value for stability
struct Sup {
    double all = 0.0, half = 0.0;
    Json witness;
    void add(double v, bool first_half, const Json& w) {
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        if (first_half) half = std::max(half, v);
        if (v > all) {
            all = v;
            witness = w;
        }
    }
    Json values() const {
        return Json{{"constant", all}, {"half_sample", half}, {"stability", all > 0.0 ? half / all : 1.0}};
    }
};

Vec3 halton_ball(std::uint64_t j, double R) {
    double r = R * std::cbrt(radical_inverse(j, 2));
    double z = 2.0 * radical_inverse(j, 3) - 1.0, ph = 2.0 * kPi * radical_inverse(j, 5);
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * s * std::cos(ph), r * s * std::sin(ph), r * z};
}

}  // namespace

std::vector<std::string> suite_check_ids() {
    return {"kernel_bounds",    "sphere_bounds",   "velocity_growth",       "position_deviation",
            "velocity_separation", "velocity_support", "averaged_density",  "weighted_charge",
            "pointwise_decay",  "improved_decay",  "momentum_conservation", "field_membership"};
}

std::vector<CheckResult> lemma_suite(const RunArtifacts& run, const SuiteOptions& opt) {
    for (const auto& id : [&] {
             std::vector<std::string> v;
             std::stringstream ss(opt.filter);
             std::string item;
             while (std::getline(ss, item, ',')) v.push_back(item);
             return v;
         }()) {
        auto ids = suite_check_ids();
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw ConfigError("unknown check id: " + id);
    }
    const RunConfig& cfg = run.cfg;
    const InitialData data = make_scenario(cfg);
    const GridSpec g = grid_spec(cfg);
    ZeroField zero;
    const FieldOracle& P = run.has_push ? static_cast<const FieldOracle&>(run.push_field) : zero;
    const FieldOracle* Kp = run.has_push ? &run.push_field : nullptr;
    const double K0 = run.push_K0, K1a = run.push_K1a;
    const double lK = K0 * std::log(2.0 + K0);
    const int nw = std::max(1, opt.workers);
    std::vector<CheckResult> out;
    auto want = [&](const char* id) { return selected(opt.filter, id); };

    if (want("kernel_bounds")) {
        CheckResult c{"kernel_bounds", "explicit bounds of the cone kernels", "pass"};
        KernelBoundReport r = kernel_bound_check(opt.kernel_samples, 1e3, cfg.seed);
        const char* names[4] = {"kT", "kz", "grad_v_d", "omega_plus_vhat"};
        c.values["samples"] = r.samples;
        for (int i = 0; i < 4; ++i) {
            c.values[names[i]] = {{"violations", r.violations[i]}, {"worst_ratio", r.worst_ratio[i]}};
            if (r.violations[i] > 0) c.status = "fail";
        }
        out.push_back(c);
    }

    if (want("sphere_bounds")) {
        CheckResult c{"sphere_bounds", "sphere integrals of (1+|y|)^-k", "pass"};
        std::vector<SphereBoundSample> smp;
        const double tmax = std::max(g.t1, 10.0), rmax = 2.0 * std::max(g.R, g.t1);
        for (std::size_t i = 0; i < opt.sphere_samples; ++i) {
            std::uint64_t j = i + 1;
            SphereBoundSample s;
            s.t = tmax * radical_inverse(j, 2);
            Vec3 d = halton_ball(j, 1.0);
            double n = norm(d);
            s.x = n > 0.0 ? (rmax * radical_inverse(j, 7) / n) * d : Vec3{};
            s.k_exp = 2 + static_cast<int>(4 * radical_inverse(j, 11));
            smp.push_back(s);
        }
        SphereBoundReport r = sphere_integral_bound_check(smp, 1e-4, {24, 48, true});
        c.values = {{"samples", r.samples},
                    {"checked", r.checked},
                    {"violations", r.violations},
                    {"worst_ratio", r.worst_ratio},
                    {"max_quadrature_gap", r.max_quadrature_gap}};
        c.witnesses["worst"] = {{"t", r.witness.t}, {"x", vec_json(r.witness.x)}, {"k", r.witness.k_exp}};
        if (r.violations > 0) c.status = "fail";
        out.push_back(c);
    }

    // shells and their pushes through the field the particles moved in
    Decomposition dec;
    std::vector<PushedEnsemble> pushed;
    std::vector<Shell> shells;
    const bool need_push = want("velocity_growth") || want("position_deviation") || want("weighted_charge") ||
                           want("pointwise_decay") || want("improved_decay") || want("momentum_conservation");
    const bool need_shells = need_push || want("velocity_separation") || want("velocity_support") ||
                             want("averaged_density");
    if (need_shells && data.has_density()) {
        dec = decompose(data, cfg.k_max, cfg.tail_tolerance);
        pushed.resize(run.ensembles.size());
        for (std::size_t e = 0; e < run.ensembles.size(); ++e) {
            const auto& ens = run.ensembles[e];
            if (ens.k < 1 || ens.k > static_cast<int>(dec.components.size())) continue;
            if (need_push) pushed[e] = push_ensemble(ens, P, g.t1, cfg.ode_tol, nw);
            Shell s;
            s.k = ens.k;
            s.comp = &dec.components[ens.k - 1];
            if (s.comp->empty) continue;
            s.pushed = &pushed[e];
            s.fnorm = s.comp->sampled_sup > 0.0 ? s.comp->sampled_sup : s.comp->sup_bound;
            s.L = dyadic_bounds(ens.k, K0, K1a);
            shells.push_back(s);
        }
    }

    if (want("velocity_growth")) {
        CheckResult c{"velocity_growth", "velocity growth along characteristics", "measured"};
        std::vector<Trajectory> all, half;
        for (const auto& s : shells)
            for (std::size_t i = 0; i < s.pushed->particles.size(); ++i) {
                all.push_back(s.pushed->particles[i].traj);
                if (i % 2 == 0) half.push_back(s.pushed->particles[i].traj);
            }
        VelocityBoundReport r = velocity_bound_report(all, K0), rh = velocity_bound_report(half, K0);
        double C = std::max(r.forward_ratio, r.backward_ratio), Ch = std::max(rh.forward_ratio, rh.backward_ratio);
        c.values = {{"constant", C},
                    {"forward", r.forward_ratio},
                    {"backward", r.backward_ratio},
                    {"L", r.L},
                    {"K0", K0},
                    {"trajectories", all.size()},
                    {"half_sample", Ch},
                    {"stability", C > 0.0 ? Ch / C : 1.0}};
        out.push_back(c);
    }

    if (want("position_deviation")) {
        CheckResult c{"position_deviation", "position deviation from straight lines", "measured"};
        Sup sup;
        for (const auto& s : shells)
            for (std::size_t i = 0; i < s.pushed->particles.size(); ++i) {
                const auto& K = s.pushed->particles[i].traj.knots;
                if (K.empty()) continue;
                const Vec3 X0 = K.front().X;
                const double Lam = norm(K.front().V) + (1.0 + lK) * (1.0 + lK);
                for (const auto& kn : K) {
                    if (kn.s <= 0.0) continue;
                    double lhs = norm(kn.X - X0 - kn.s * hat_velocity(kn.V));
                    double shape = Lam * (std::log1p(kn.s) + std::log1p(norm(X0)));
                    sup.add(lhs / shape, i % 2 == 0, point_json(kn.s, X0));
                }
            }
        c.values = sup.values();
        c.values["K0"] = K0;
        c.witnesses["sup"] = sup.witness;
        out.push_back(c);
    }

    // backward samples at probe points: velocities aimed at the shell support
    const bool need_back = want("velocity_separation") || want("velocity_support");
    if (need_back) {
        Sup sep, supp;
        auto probes = k0_probes(g, opt.probes * 2);
        std::vector<SpacetimePoint> use;
        for (const auto& p : probes)
            if (p.t >= 1.0 && use.size() < opt.probes) use.push_back(p);
        for (const auto& s : shells) {
            const double R = std::ldexp(1.0, s.k + 1);
            const int m = 12;
            std::vector<std::vector<std::pair<Vec3, bool>>> kept(use.size());
            std::vector<std::vector<double>> ratio_supp(use.size());
            parallel_for(use.size(), nw, [&](std::size_t q) {
                const auto& p = use[q];
                for (int i = 0; i < m; ++i) {
                    Vec3 y0 = halton_ball(q * m + i + 1, 0.5 * R);
                    Vec3 u = (p.x - y0) / p.t;
                    double un = norm(u);
                    if (un >= 0.999) continue;
                    Vec3 v = u / std::sqrt(1.0 - un * un);
                    if (norm(v) > R) continue;
                    Trajectory tr = integrate_characteristic(P, p.t, {p.x, v}, 0.0, cfg.ode_tol);
                    if (tr.exited || tr.knots.front().s != 0.0) continue;
                    const Knot& k0 = tr.knots.front();
                    bool in = norm(k0.X) <= R && norm(k0.V) <= R;
                    kept[q].push_back({v, in});
                    if ((*s.comp)(k0.X, k0.V) > 0.0) ratio_supp[q].push_back(norm(v) / (std::ldexp(1.0, s.k) + lK));
                }
            });
            const double Lam = R + (1.0 + lK) * (1.0 + lK);
            const double shape = Lam * (std::log(1.0 + K1a + K0 + R) + 1.0);
            for (std::size_t q = 0; q < use.size(); ++q) {
                const auto& kv = kept[q];
                for (std::size_t a = 0; a < kv.size(); ++a)
                    for (std::size_t b = a + 1; b < kv.size(); ++b) {
                        if (!kv[a].second || !kv[b].second) continue;
                        double lhs = use[q].t * norm(hat_velocity(kv[a].first) - hat_velocity(kv[b].first));
                        sep.add(lhs / shape, q % 2 == 0,
                                Json{{"k", s.k}, {"t", use[q].t}, {"x", vec_json(use[q].x)}});
                    }
                for (double r : ratio_supp[q])
                    supp.add(r, q % 2 == 0, Json{{"k", s.k}, {"t", use[q].t}, {"x", vec_json(use[q].x)}});
            }
        }
        if (want("velocity_separation")) {
            CheckResult c{"velocity_separation", "velocity separation of characteristics meeting at a point",
                          "measured"};
            c.values = sep.values();
            c.witnesses["sup"] = sep.witness;
            out.push_back(c);
        }
        if (want("velocity_support")) {
            CheckResult c{"velocity_support", "velocity support of shell densities", "measured"};
            c.values = supp.values();
            c.values["support_factor"] = cfg.support_factor;
            c.values["within_support_factor"] = supp.all <= cfg.support_factor;
            c.witnesses["sup"] = supp.witness;
            out.push_back(c);
        }
    }

    if (want("averaged_density")) {
        CheckResult c{"averaged_density", "decay of the shell charge density", "measured"};
        Sup sup;
        auto probes = k0_probes(g, opt.probes * 2);
        std::vector<SpacetimePoint> use;
        for (const auto& p : probes)
            if (p.t >= 1.0 && use.size() < std::min<std::size_t>(opt.probes, 16)) use.push_back(p);
        const int n = std::max(4, opt.vel_n);
        const GaussLegendre gr = gauss_legendre(n, 0.0, 1.0);
        const SphereRule sr = sphere_rule(std::max(2, n / 2), n);
        for (const auto& s : shells) {
            std::vector<double> vals(use.size(), 0.0);
            parallel_for(use.size(), nw, [&](std::size_t q) {
                const auto& p = use[q];
                // ball in vhat around x / t
                Vec3 cen = p.x / std::max(p.t, norm(p.x) / 0.99);
                double rad = std::min(1.0, 1.5 * s.comp->r_outer / p.t);
                double acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    double rr = rad * gr.nodes[i];
                    for (std::size_t d = 0; d < sr.dirs.size(); ++d) {
                        Vec3 u = cen + rr * sr.dirs[d];
                        double u2 = norm2(u);
                        if (u2 >= 1.0) continue;
                        Vec3 v = u / std::sqrt(1.0 - u2);
                        double f = 0.0;
                        Trajectory tr = integrate_characteristic(P, p.t, {p.x, v}, 0.0, cfg.ode_tol);
                        if (!tr.exited && tr.knots.front().s == 0.0)
                            f = (*s.comp)(tr.knots.front().X, tr.knots.front().V);
                        acc += rad * gr.weights[i] * rr * rr * sr.weights[d] * f * std::pow(1.0 - u2, -2.5);
                    }
                }
                vals[q] = acc;
            });
            const double shape = s.fnorm * std::pow(s.L.L1, 5) * std::pow(s.L.L2, 3) * std::pow(s.L.L3, 3);
            for (std::size_t q = 0; q < use.size(); ++q) {
                double w = std::pow(std::ldexp(1.0, s.k) + use[q].t + norm(use[q].x), 3);
                sup.add(vals[q] * w / shape, q % 2 == 0,
                        Json{{"k", s.k}, {"t", use[q].t}, {"x", vec_json(use[q].x)}, {"density", vals[q]}});
            }
        }
        c.values = sup.values();
        c.witnesses["sup"] = sup.witness;
        out.push_back(c);
    }

    // cone observers shared by the weighted-charge and field-decay checks
    ObserverSet obs;
    for (int i = 0; i < 8; ++i) {
        Vec3 x = halton_ball(i + 1, 0.8 * g.R);
        obs.xs.push_back(x);
    }
    for (int i = 1; i <= 6; ++i) obs.ts.push_back(g.t0 + (g.t1 - g.t0) * i / 6.0);
    const ConeOptions copt = cone_options(cfg);

    if (want("weighted_charge")) {
        CheckResult c{"weighted_charge", "weighted charge on backward cones", "measured"};
        Sup sup[3];
        for (const auto& s : shells) {
            std::vector<std::array<double, 3>> acc(obs.size(), {0.0, 0.0, 0.0});
            std::vector<std::vector<std::array<double, 3>>> part(nw, acc);
            parallel_chunks(s.pushed->particles.size(), nw, [&](int wk, std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) {
                    const auto& pp = s.pushed->particles[i];
                    if (pp.traj.knots.empty()) continue;
                    for (std::size_t ix = 0; ix < obs.xs.size(); ++ix) {
                        std::size_t hint = 0;
                        for (std::size_t it = 0; it < obs.ts.size(); ++it) {
                            Intersection hit = retarded_intersection(pp.traj, {obs.ts[it], obs.xs[ix]},
                                                                     copt.root_tol, 1e-12, &hint);
                            if (!hit.found || hit.r < copt.r_min) continue;
                            double D = kernels::retard(hit.omega, hit.V);
                            auto& a = part[wk][ix * obs.ts.size() + it];
                            a[0] += pp.w / D;
                            a[1] += pp.w / (hit.r * D);
                            a[2] += pp.w / (hit.r * hit.r * D);
                        }
                    }
                }
            });
            for (int wk = 0; wk < nw; ++wk)
                for (std::size_t j = 0; j < acc.size(); ++j)
                    for (int p = 0; p < 3; ++p) acc[j][p] += part[wk][j][p];
            for (std::size_t j = 0; j < acc.size(); ++j) {
                SpacetimePoint o = obs.at(j);
                for (int p = 0; p < 3; ++p) {
                    double shape = s.fnorm * std::pow(std::ldexp(1.0, s.k) + o.t, -p) *
                                   std::ldexp(1.0, (6 - 2 * p) * s.k) * std::pow(s.L.L1, 2 + p) *
                                   std::pow(s.L.L2, p) * std::pow(s.L.L3, p);
                    sup[p].add(acc[j][p] / shape, (j / obs.ts.size()) % 2 == 0,
                               Json{{"k", s.k}, {"t", o.t}, {"x", vec_json(o.x)}, {"value", acc[j][p]}});
                }
            }
        }
        for (int p = 0; p < 3; ++p) {
            std::string key = "p" + std::to_string(p);
            c.values[key] = sup[p].values();
            c.witnesses[key] = sup[p].witness;
        }
        c.values["r_min"] = copt.r_min;
        out.push_back(c);
    }

    if (want("pointwise_decay") || want("improved_decay")) {
        Sup T_raw, T_norm, S_raw, S_norm, I_raw, I_norm;
        Json per_shell = Json::array();
        for (const auto& s : shells) {
            auto terms = cone_fields(std::vector<PushedEnsemble>{*s.pushed}, Kp, obs, copt, nullptr, nw);
            double tmax = 0.0, smax = 0.0;
            for (std::size_t j = 0; j < terms.size(); ++j) {
                SpacetimePoint o = obs.at(j);
                const double r = norm(o.x);
                const bool first = (j / obs.ts.size()) % 2 == 0;
                Json w{{"k", s.k}, {"t", o.t}, {"x", vec_json(o.x)}};
                double aT = norm(terms[j].ET) * (r + o.t + 1.0) * (r + o.t + 1.0);
                double nT = std::ldexp(1.0, 2 * s.k) * std::pow(s.L.L1, 5) * std::pow(s.L.L2, 2) *
                            std::pow(s.L.L3, 2) * s.fnorm;
                T_raw.add(aT, first, w);
                T_norm.add(aT / nT, first, w);
                tmax = std::max(tmax, aT);
                double aS = norm(terms[j].ES) * decay_weight(o.t, o.x);
                smax = std::max(smax, aS);
                S_raw.add(aS, first, w);
                if (K0 > 0.0) {
                    double nS = std::ldexp(1.0, 4 * s.k) * std::pow(s.L.L1, 4) * s.L.L2 * s.L.L3 * K0 * s.fnorm;
                    S_norm.add(aS / nS, first, w);
                }
                if (r <= o.t) {
                    double aI = norm(terms[j].ES) * (o.t - r + 1.0) * (o.t - r + 1.0) * (r + o.t + 1.0) /
                                std::log(o.t - r + 2.0);
                    I_raw.add(aI, first, w);
                    if (K0 > 0.0) {
                        double nI = std::pow(s.L.L1, 6) * std::pow(s.L.L2, 3) * std::pow(s.L.L3, 3) * K0 * s.fnorm;
                        I_norm.add(aI / nI, first, w);
                    }
                }
            }
            per_shell.push_back({{"k", s.k}, {"ET_shape", tmax}, {"ES_shape", smax}});
        }
        if (want("pointwise_decay")) {
            CheckResult c{"pointwise_decay", "pointwise decay of the transport and source fields", "measured"};
            c.values = {{"ET_shape", T_raw.values()},
                        {"ET_constant", T_norm.values()},
                        {"ES_shape", S_raw.values()},
                        {"ES_constant", S_norm.values()},
                        {"per_shell", per_shell},
                        {"r_min", copt.r_min}};
            c.witnesses = {{"ET", T_raw.witness}, {"ES", S_raw.witness}};
            out.push_back(c);
        }
        if (want("improved_decay")) {
            CheckResult c{"improved_decay", "improved interior decay of the source field", "measured"};
            c.values = {{"ES_shape", I_raw.values()}, {"ES_constant", I_norm.values()}};
            c.witnesses = {{"ES", I_raw.witness}};
            out.push_back(c);
        }
    }

    if (want("momentum_conservation")) {
        CheckResult c{"momentum_conservation", "conservation on backward cones", "measured"};
        OracleConfig oc;
        Json rows = Json::array();
        double worst = 0.0;
        const Vec3 x{0.5, 0.3, -0.2};
        for (const auto& s : shells)
            for (double t : {0.25 * g.t1, 0.5 * g.t1, g.t1}) {
                t = std::min(t, 4.0);
                MomentumCheck m = momentum_conservation_check(*s.pushed, *s.comp, {t, x}, oc, nw);
                worst = std::max(worst, m.rel_err);
                rows.push_back({{"k", s.k}, {"t", t}, {"lhs", m.lhs}, {"rhs", m.rhs}, {"rel_err", m.rel_err}});
            }
        c.values = {{"worst_rel_err", worst}, {"rows", rows}};
        c.witnesses["x"] = vec_json(x);
        out.push_back(c);
    }

    if (want("field_membership")) {
        CheckResult c{"field_membership", "decay class of the field iterate", "measured"};
        bool ok = run.field.K0 <= run.Lambda && run.field.K1a <= run.Lambda * run.Lambda;
        c.values = {{"iterate", run.n},
                    {"K0", run.field.K0},
                    {"K1a", run.field.K1a},
                    {"Lambda", run.Lambda},
                    {"member", ok}};
        out.push_back(c);
    }
    return out;
}

Json report_json(const std::vector<CheckResult>& checks, const std::string& config_hash) {
    Json arr = Json::array();
    bool ok = true;
    for (const auto& c : checks) {
        arr.push_back({{"check_id", c.check_id},
                       {"paper_ref", c.paper_ref},
                       {"status", c.status},
                       {"values", c.values},
                       {"witnesses", c.witnesses},
                       {"config_hash", config_hash}});
        if (c.status == "fail") ok = false;
    }
    return Json{{"config_hash", config_hash}, {"hard_checks_pass", ok}, {"checks", arr}};
}

}  // namespace rvm
