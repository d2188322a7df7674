#include "rvm/fields.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rvm/kernels.hpp"
#include "rvm/parallel.hpp"

namespace rvm {

namespace {
constexpr double kPi = 3.14159265358979323846;

Vec3 curl(const Mat3& m) { return {m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]}; }

void orthonormal_pair(const Vec3& p, Vec3& e1, Vec3& e2) {
    Vec3 a = std::abs(p.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    e1 = cross(p, a);
    e1 = e1 / norm(e1);
    e2 = cross(p, e1);
}
}  // namespace

ObserverSphere::ObserverSphere(const SphereConfig& cfg) : cfg_(cfg) {
    if (cfg.ntheta < 2 || cfg.nphi < 1) throw ConfigError("sphere rule needs ntheta >= 2 and nphi >= 1");
    fixed_ = sphere_rule(cfg.ntheta, cfg.nphi);
    gl_full_ = gauss_legendre(cfg.ntheta);
    gl_ = gauss_legendre(std::max(4, (cfg.ntheta + 1) / 2));
    cphi_.resize(cfg.nphi);
    sphi_.resize(cfg.nphi);
    for (int j = 0; j < cfg.nphi; ++j) {
        double ph = 2.0 * kPi * (j + 0.5) / cfg.nphi;
        cphi_[j] = std::cos(ph);
        sphi_[j] = std::sin(ph);
    }
}

void ObserverSphere::build(const Vec3& x, double t, SphereRule& out) const {
    const double r = norm(x);
    if (!cfg_.adapted || t <= 0.0 || r <= 1e-9 * std::max(1.0, t)) {
        out = fixed_;
        return;
    }
    out.dirs.clear();
    out.weights.clear();
    const Vec3 p = -x / r;
    Vec3 e1, e2;
    orthonormal_pair(p, e1, e2);
    const double lo = std::abs(r - t), hi = r + t;
    double breaks[5];
    int nb = 0;
    breaks[nb++] = lo;
    for (double b : {3.0, 8.0, 20.0})
        if (b > lo && b < hi) breaks[nb++] = b;
    breaks[nb++] = hi;
    // |y|^2 = r^2 + t^2 - 2 r t cos(theta)
    auto cth = [&](double lam) { return std::clamp((r * r + t * t - lam * lam) / (2.0 * r * t), -1.0, 1.0); };
    const double wphi = 2.0 * kPi / cfg_.nphi;
    for (int pnl = 0; pnl + 1 < nb; ++pnl) {
        double ca = cth(breaks[pnl + 1]), cb = cth(breaks[pnl]);
        if (cb <= ca) continue;
        double mid = 0.5 * (ca + cb), half = 0.5 * (cb - ca);
        const GaussLegendre& gl = nb == 2 ? gl_full_ : gl_;
        const std::vector<double>& nodes = gl.nodes;
        const std::vector<double>& wts = gl.weights;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            double c = mid + half * nodes[i];
            double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            double wc = wts[i] * half * wphi;
            for (int j = 0; j < cfg_.nphi; ++j) {
                out.dirs.push_back(c * p + s * (cphi_[j] * e1 + sphi_[j] * e2));
                out.weights.push_back(wc);
            }
        }
    }
}

namespace {

FieldSample kirchhoff_on(const InitialData& data, double t, const Vec3& x, const SphereRule& rule) {
    Vec3 E, B;
    for (std::size_t n = 0; n < rule.dirs.size(); ++n) {
        const Vec3& w = rule.dirs[n];
        Vec3 y = x + t * w;
        Vec3 e, b;
        if (data.E0) {
            Mat3 dE = data.dE0(y);
            e = data.E0(y) + t * mul(dE, w);
            b -= t * curl(dE);
        }
        if (data.B0) {
            Mat3 dB = data.dB0(y);
            b += data.B0(y) + t * mul(dB, w);
            e += t * curl(dB);
        }
        E += rule.weights[n] * e;
        B += rule.weights[n] * b;
    }
    return {E / (4.0 * kPi), B / (4.0 * kPi)};
}

}  // namespace

FieldSample kirchhoff_linear(const InitialData& data, double t, const Vec3& x, const SphereConfig& sphere) {
    if (t < 0.0) throw std::invalid_argument("kirchhoff_linear: t must be non-negative");
    if (t == 0.0) return {data.E0 ? data.E0(x) : Vec3{}, data.B0 ? data.B0(x) : Vec3{}};
    ObserverSphere os(sphere);
    SphereRule rule;
    os.build(x, t, rule);
    return kirchhoff_on(data, t, x, rule);
}

double sphere_integral_decay(int k_exp, double t, const Vec3& x, double tol) {
    if (t <= 0.0) return 0.0;
    const double r = norm(x);
    if (r < 1e-14) return 4.0 * kPi * t * t * std::pow(1.0 + t, -k_exp);
    auto f = [k_exp](double lam) { return lam * std::pow(1.0 + lam, -k_exp); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double I = GK::integrate(f, std::abs(t - r), t + r, 15, tol);
    return 2.0 * kPi * t / r * I;
}

double sphere_integral_bound(int k_exp, double t, double r) {
    if (k_exp < 2) throw std::invalid_argument("sphere_integral_bound: k_exp must be >= 2");
    double near = 1.0 + std::abs(t - r), far = 1.0 + t + r;
    if (k_exp == 2) return 8.0 * kPi * t * t / (far * near);
    return 4.0 * kPi * t / far * std::pow(near, 2.0 - k_exp);
}

SphereBoundReport sphere_integral_bound_check(const std::vector<SphereBoundSample>& samples, double quad_tol,
                                              const SphereConfig& direct) {
    SphereBoundReport rep;
    rep.samples = samples.size();
    ObserverSphere os(direct);
    SphereRule rule;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sm = samples[i];
        if (sm.k_exp < 2) throw std::invalid_argument("sphere_integral_bound_check: k_exp must be >= 2");
        if (sm.t <= 0.0) continue;
        ++rep.checked;
        double I = sphere_integral_decay(sm.k_exp, sm.t, sm.x, 1e-13);
        double B = sphere_integral_bound(sm.k_exp, sm.t, norm(sm.x));
        double ratio = I / B;
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.witness = sm;
        }
        if (I > B * (1.0 + quad_tol)) ++rep.violations;
        if (i % 10 == 0) {
            os.build(sm.x, sm.t, rule);
            double J = 0.0;
            for (std::size_t n = 0; n < rule.dirs.size(); ++n)
                J += rule.weights[n] * std::pow(1.0 + norm(sm.x + sm.t * rule.dirs[n]), -sm.k_exp);
            J *= sm.t * sm.t;
            rep.max_quadrature_gap = std::max(rep.max_quadrature_gap, std::abs(J - I) / I);
        }
    }
    return rep;
}

SurfaceTerms::SurfaceTerms(const InitialData& data, const SphereConfig& sphere, const VelocityConfig& vel)
    : data_(&data), sphere_(sphere), ball_(ball_rule(vel.radius, vel.nr, vel.ntheta, vel.nphi)) {
    if (data.separable() && data.velocity_isotropic) {
        // omega . kz = 1, and the kzB integral vanishes by symmetry about omega
        auto gl = gauss_legendre(64, 0.0, vel.radius);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double v = gl.nodes[i];
            vel_mass_ += gl.weights[i] * 4.0 * kPi * v * v * data.f0_velocity({0, 0, v});
        }
    }
}

FieldSample SurfaceTerms::operator()(double t, const Vec3& x) const {
    if (t <= 0.0 || !data_->has_density() || !data_->f0) return {};
    if (!(data_->separable() && data_->velocity_isotropic)) return product(t, x);
    SphereRule rule;
    sphere_.build(x, t, rule);
    Vec3 E;
    for (std::size_t n = 0; n < rule.dirs.size(); ++n)
        E += (rule.weights[n] * data_->f0_space(x + t * rule.dirs[n])) * rule.dirs[n];
    return {-t * vel_mass_ * E, {}};
}

FieldSample SurfaceTerms::product(double t, const Vec3& x) const {
    if (t <= 0.0 || !data_->has_density() || !data_->f0) return {};
    SphereRule rule;
    sphere_.build(x, t, rule);
    Vec3 E, B;
    for (std::size_t n = 0; n < rule.dirs.size(); ++n) {
        const Vec3& w = rule.dirs[n];
        Vec3 y = x + t * w;
        Vec3 e, b;
        for (std::size_t m = 0; m < ball_.points.size(); ++m) {
            const Vec3& v = ball_.points[m];
            double f = data_->f0(y, v);
            if (f == 0.0) continue;
            double c = ball_.weights[m] * f;
            e += c * kernels::kz(w, v);
            b += c * kernels::kzB(w, v);
        }
        E += rule.weights[n] * e;
        B += rule.weights[n] * b;
    }
    return {-t * E, t * B};
}

double SurfaceTerms::majorant(double t, const Vec3& x) const {
    if (t <= 0.0 || !data_->has_density() || !data_->f0) return 0.0;
    SphereRule rule;
    sphere_.build(x, t, rule);
    double acc = 0.0;
    for (std::size_t n = 0; n < rule.dirs.size(); ++n) {
        Vec3 y = x + t * rule.dirs[n];
        double inner = 0.0;
        for (std::size_t m = 0; m < ball_.points.size(); ++m)
            inner += ball_.weights[m] * 2.0 * lorentz_factor(ball_.points[m]) * data_->f0(y, ball_.points[m]);
        acc += rule.weights[n] * inner;
    }
    return t * acc;
}

Vec3 surface_term_Ez(const InitialData& data, const SpacetimePoint& obs, const SphereConfig& sphere,
                     const VelocityConfig& vel) {
    if (!(obs.t > 0.0)) throw std::invalid_argument("surface_term_Ez: t must be positive");
    return SurfaceTerms(data, sphere, vel)(obs.t, obs.x).E;
}

PushedEnsemble push_ensemble(const ParticleEnsemble& ens, const FieldOracle& field, double t_end, double tol,
                             int workers) {
    PushedEnsemble out;
    out.k = ens.k;
    std::vector<const Particle*> ps;
    for (const auto& p : ens.particles)
        if (p.w != 0.0) ps.push_back(&p);
    out.particles.resize(ps.size());
    parallel_for(ps.size(), workers, [&](std::size_t i) {
        out.particles[i].w = ps[i]->w;
        out.particles[i].traj = integrate_characteristic(field, 0.0, {ps[i]->x, ps[i]->v}, t_end, tol);
    });
    return out;
}

void accumulate_trajectory(const Trajectory& traj, double w, const ObserverSet& obs, const FieldOracle* K_prev,
                           const ConeOptions& opt, ConeTerms* out, ConeTally& tally) {
    const auto& K = traj.knots;
    if (w == 0.0 || K.empty()) return;
    const std::size_t nts = obs.ts.size();
    for (std::size_t ix = 0; ix < obs.xs.size(); ++ix) {
        const Vec3& x = obs.xs[ix];
        const double d0 = K.front().s + norm(K.front().X - x);
        std::size_t hint = 0;
        for (std::size_t it = 0; it < nts; ++it) {
            const double t = obs.ts[it];
            if (t < d0) continue;  // signal from the start of the path has not arrived
            Intersection I = retarded_intersection(traj, {t, x}, opt.root_tol, 0.0, &hint);
            if (!I.found) {
                if (traj.exited) ++tally.absorbed;
                continue;
            }
            if (I.r < opt.r_lo || I.r > opt.r_hi) continue;
            ++tally.crossings;
            if (I.r < opt.r_min) {
                ++tally.dropped;
                tally.dropped_weight += w;
                continue;
            }
            ConeTerms& o = out[ix * nts + it];
            const double D = kernels::retard(I.omega, I.V);
            const double c2 = w / (I.r * I.r * D);
            o.ET -= c2 * kernels::kT(I.omega, I.V);
            o.BT -= c2 * kernels::kTB(I.omega, I.V);
            if (opt.source && K_prev) {
                Vec3 F = force(K_prev->sample(I.s, I.X), I.V);
                const double c1 = w / (I.r * D);
                o.ES -= c1 * mul(kernels::kS(I.omega, I.V), F);
                o.BS += c1 * mul(kernels::kSB(I.omega, I.V), F);
            }
        }
    }
}

namespace {
template <class Body>
std::vector<ConeTerms> reduce_over(std::size_t n, std::size_t nobs, int workers, ConeTally* tally, Body body) {
    int nw = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
    std::vector<std::vector<ConeTerms>> acc(nw, std::vector<ConeTerms>(nobs));
    std::vector<ConeTally> tal(nw);
    parallel_chunks(n, nw, [&](int wk, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i, acc[wk].data(), tal[wk]);
    });
    for (int wk = 1; wk < nw; ++wk) {
        for (std::size_t j = 0; j < nobs; ++j) acc[0][j] += acc[wk][j];
        tal[0] += tal[wk];
    }
    if (tally) *tally += tal[0];
    return std::move(acc[0]);
}
}  // namespace

std::vector<ConeTerms> cone_fields(const std::vector<ParticleEnsemble>& ensembles, const FieldOracle& push_field,
                                   const FieldOracle* K_prev, const ObserverSet& obs, const ConeOptions& opt,
                                   ConeTally* tally, int workers) {
    std::vector<const Particle*> ps;
    for (const auto& e : ensembles)
        for (const auto& p : e.particles)
            if (p.w != 0.0) ps.push_back(&p);
    double t_end = 0.0;
    for (double t : obs.ts) t_end = std::max(t_end, t);
    return reduce_over(ps.size(), obs.size(), workers, tally, [&](std::size_t i, ConeTerms* out, ConeTally& tl) {
        Trajectory tr = integrate_characteristic(push_field, 0.0, {ps[i]->x, ps[i]->v}, t_end, opt.ode_tol);
        accumulate_trajectory(tr, ps[i]->w, obs, K_prev, opt, out, tl);
    });
}

std::vector<ConeTerms> cone_fields(const std::vector<PushedEnsemble>& ensembles, const FieldOracle* K_prev,
                                   const ObserverSet& obs, const ConeOptions& opt, ConeTally* tally, int workers) {
    std::vector<const PushedParticle*> ps;
    for (const auto& e : ensembles)
        for (const auto& p : e.particles) ps.push_back(&p);
    return reduce_over(ps.size(), obs.size(), workers, tally, [&](std::size_t i, ConeTerms* out, ConeTally& tl) {
        accumulate_trajectory(ps[i]->traj, ps[i]->w, obs, K_prev, opt, out, tl);
    });
}

namespace {
ConeTerms single(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const FieldOracle* K_prev,
                 const ConeOptions& opt, ConeTally* tally) {
    ObserverSet os{{obs.x}, {obs.t}};
    ConeTerms out;
    ConeTally tl;
    for (const auto& e : ensembles)
        for (const auto& p : e.particles) accumulate_trajectory(p.traj, p.w, os, K_prev, opt, &out, tl);
    if (tally) *tally += tl;
    return out;
}
}  // namespace

Vec3 cone_field_ET(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const ConeOptions& opt,
                   ConeTally* tally) {
    ConeOptions o = opt;
    o.source = false;
    return single(ensembles, obs, nullptr, o, tally).ET;
}

Vec3 cone_field_ES(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs,
                   const FieldOracle& K_prev, const ConeOptions& opt, ConeTally* tally) {
    ConeOptions o = opt;
    o.source = true;
    return single(ensembles, obs, &K_prev, o, tally).ES;
}

Vec3 cone_field_B(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const FieldOracle* K_prev,
                  const ConeOptions& opt, ConeTally* tally) {
    ConeTerms c = single(ensembles, obs, K_prev, opt, tally);
    return c.BT + c.BS;
}

FieldSample assemble_field(const FieldSample& linear, const FieldSample& surface, const ConeTerms& cone) {
    return {linear.E + surface.E + cone.ET + cone.ES, linear.B + surface.B + cone.BT + cone.BS};
}

DataField::DataField(const InitialData& data, const SphereConfig& sphere, const VelocityConfig& vel)
    : data_(&data), sphere_(sphere), surface_(data, sphere, vel) {}

FieldSample DataField::operator()(double t, const Vec3& x) const {
    FieldSample lin = kirchhoff_linear(*data_, t, x, sphere_);
    return lin + surface_(t, x);
}

FieldCache build_field_cache(const std::function<FieldSample(const SpacetimePoint&)>& fn, const GridSpec& grid,
                             int workers) {
    FieldCache cache(grid);
    parallel_for(grid.nodes(), workers, [&](std::size_t i) {
        SpacetimePoint p = grid.node(i);
        auto where = [&] {
            std::ostringstream os;
            os << "node (t=" << p.t << ", x=" << p.x.x << ", " << p.x.y << ", " << p.x.z << ")";
            return os.str();
        };
        FieldSample k;
        try {
            k = fn(p);
        } catch (const std::exception& e) {
            throw NodeFailure(where() + ": " + e.what());
        }
        if (!finite(k.E) || !finite(k.B)) throw NodeFailure(where() + ": non-finite field value");
        cache.set_node(i, k);
    });
    return cache;
}

Mat3 GradientDecomposition::total() const {
    Mat3 m{};
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) m[i][l] = Aw[i][l] + ATT[i][l] + ATS[i][l];
    return m;
}

GradientDecomposition gradient_decomposition_ET(
    const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const FieldOracle* K_prev, double a,
    double b, const std::function<double(double, const Vec3&, const Vec3&)>& density, const SphereConfig& sphere,
    const VelocityConfig& vel, const ConeOptions& opt) {
    if (!(a > 0.0 && a < b && b <= obs.t + 1e-12)) throw std::invalid_argument("gradient_decomposition_ET: need 0 < a < b <= t");
    GradientDecomposition g;
    for (const auto& e : ensembles)
        for (const auto& p : e.particles) {
            Intersection I = retarded_intersection(p.traj, obs, opt.root_tol);
            if (!I.found) {
                if (p.traj.exited) ++g.tally.absorbed;
                continue;
            }
            if (I.r < a || I.r > b) continue;
            ++g.tally.crossings;
            if (I.r < opt.r_min) {
                ++g.tally.dropped;
                g.tally.dropped_weight += p.w;
                continue;
            }
            const double D = kernels::retard(I.omega, I.V);
            Mat3 A = kernels::a_il(I.omega, I.V);
            const double c3 = p.w / (I.r * I.r * I.r * D);
            for (int i = 0; i < 3; ++i)
                for (int l = 0; l < 3; ++l) g.ATT[i][l] += c3 * A[i][l];
            if (K_prev) {
                Vec3 F = force(K_prev->sample(I.s, I.X), I.V);
                auto gd = kernels::grad_v_d(I.omega, I.V);
                const double c2 = p.w / (I.r * I.r * D);
                for (int i = 0; i < 3; ++i)
                    for (int l = 0; l < 3; ++l) g.ATS[i][l] += c2 * dot(gd[i][l], F);
            }
        }
    ObserverSphere os(sphere);
    BallRule ball = ball_rule(vel.radius, vel.nr, vel.ntheta, vel.nphi);
    SphereRule rule;
    for (int side = 0; side < 2; ++side) {
        const double s = side == 0 ? b : a;
        const double sign = side == 0 ? 1.0 : -1.0;
        const double tau = obs.t - s;
        os.build(obs.x, s, rule);
        for (std::size_t n = 0; n < rule.dirs.size(); ++n) {
            const Vec3& w = rule.dirs[n];
            Vec3 y = obs.x + s * w;
            for (std::size_t m = 0; m < ball.points.size(); ++m) {
                double f = density(std::max(0.0, tau), y, ball.points[m]);
                if (f == 0.0) continue;
                Mat3 d = kernels::d_il(w, ball.points[m]);
                double c = sign * rule.weights[n] * ball.weights[m] * f;
                for (int i = 0; i < 3; ++i)
                    for (int l = 0; l < 3; ++l) g.Aw[i][l] += c * d[i][l];
            }
        }
    }
    return g;
}

}  // namespace rvm
