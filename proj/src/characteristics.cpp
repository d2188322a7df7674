#include "rvm/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "rvm/binary_io.hpp"

namespace rvm {

Vec3 force(const FieldSample& k, const Vec3& v) { return k.E + cross(hat_velocity(v), k.B); }

Vec3 force_hat(const FieldSample& k, const Vec3& vh) {
    double s2 = norm2(vh);
    if (!(s2 < 1.0)) throw std::invalid_argument("force_hat: |vhat| >= 1");
    return std::sqrt(1.0 - s2) * (k.E + cross(vh, k.B) - dot(vh, k.E) * vh);
}

StepUnderflow::StepUnderflow(double s_fail)
    : NumericalError("step size underflow at s = " + std::to_string(s_fail)), s(s_fail) {}

namespace {

struct State {
    Vec3 X, V;
};

inline State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State r = y;
    for (auto& [c, k] : terms) {
        if (c == 0.0) continue;
        r.X += (h * c) * k->X;
        r.V += (h * c) * k->V;
    }
    return r;
}

inline void hermite(double theta, double h, double& h00, double& h10, double& h01, double& h11) {
    double t2 = theta * theta, t3 = t2 * theta;
    h00 = 2 * t3 - 3 * t2 + 1;
    h10 = (t3 - 2 * t2 + theta) * h;
    h01 = -2 * t3 + 3 * t2;
    h11 = (t3 - t2) * h;
}

}  // namespace

std::size_t Trajectory::segment(double s) const {
    if (knots.size() < 2) return 0;
    auto it = std::upper_bound(knots.begin(), knots.end(), s, [](double v, const Knot& k) { return v < k.s; });
    std::size_t i = static_cast<std::size_t>(it - knots.begin());
    if (i == 0) return 0;
    return std::min(i - 1, knots.size() - 2);
}

PhaseState Trajectory::at_segment(std::size_t k, double s) const {
    if (knots.size() == 1) return {knots[0].X, knots[0].V};
    const Knot& a = knots[k];
    const Knot& b = knots[k + 1];
    double h = b.s - a.s, th = (s - a.s) / h;
    double h00, h10, h01, h11;
    hermite(th, h, h00, h10, h01, h11);
    return {h00 * a.X + h10 * a.dX + h01 * b.X + h11 * b.dX, h00 * a.V + h10 * a.dV + h01 * b.V + h11 * b.dV};
}

Vec3 Trajectory::position_segment(std::size_t k, double s) const {
    if (knots.size() == 1) return knots[0].X;
    const Knot& a = knots[k];
    const Knot& b = knots[k + 1];
    double h = b.s - a.s, th = (s - a.s) / h;
    double h00, h10, h01, h11;
    hermite(th, h, h00, h10, h01, h11);
    return h00 * a.X + h10 * a.dX + h01 * b.X + h11 * b.dX;
}

PhaseState Trajectory::at(double s) const { return at_segment(segment(s), s); }
Vec3 Trajectory::position(double s) const { return position_segment(segment(s), s); }

Trajectory integrate_characteristic(const FieldOracle& field, double t, const PhaseState& endpoint, double s_target,
                                    double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("integrate_characteristic: tol must be positive");
    if (!std::isfinite(t) || !(s_target >= 0.0)) throw std::invalid_argument("integrate_characteristic: bad times");
    Trajectory tr;
    tr.t_end = t;
    tr.x_end = endpoint.x;
    tr.v_end = endpoint.v;

    auto rhs = [&](double s, const State& y, State& dy) {
        FieldSample k = field.sample(s, y.X);
        Vec3 vh = hat_velocity(y.V);
        if (!(norm2(vh) < 1.0)) throw NumericalError("|vhat| reached 1");
        dy.X = vh;
        dy.V = k.E + cross(vh, k.B);
        if (!finite(dy.V)) throw NumericalError("non-finite force at s = " + std::to_string(s));
    };

    std::vector<Knot> out;
    State y{endpoint.x, endpoint.v};
    double s = t;
    if (!field.contains(s, y.X)) {
        tr.exited = true;
        tr.knots.push_back({s, y.X, y.V, hat_velocity(y.V), Vec3{}});
        return tr;
    }
    State k1;
    rhs(s, y, k1);
    out.push_back({s, y.X, y.V, k1.X, k1.V});
    const double span = s_target - t;
    if (span == 0.0) {
        tr.knots = std::move(out);
        return tr;
    }
    const double dir = span > 0 ? 1.0 : -1.0;
    double h = dir * std::min(std::abs(span), std::max(1e-3, 0.1 * std::pow(tol, 0.2)));

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double h_floor = 1e-13 * std::max(1.0, std::abs(t) + std::abs(s_target));
    int shrink_for_domain = 0;
    long steps = 0;
    while (dir * (s_target - s) > 0.0) {
        if (++steps > 50'000'000) throw StepUnderflow(s);
        bool last = false;
        if (dir * (s + h - s_target) >= 0.0) {
            h = s_target - s;
            last = true;
        }
        State k2, k3, k4, k5, k6, k7;
        State y2 = axpy(y, h, {{a21, &k1}});
        State y3, y4, y5, y6, yn;
        bool outside = false;
        auto inside = [&](double ss, const State& yy) {
            if (!field.contains(ss, yy.X)) outside = true;
            return !outside;
        };
        if (inside(s + c2 * h, y2)) {
            rhs(s + c2 * h, y2, k2);
            y3 = axpy(y, h, {{a31, &k1}, {a32, &k2}});
        }
        if (!outside && inside(s + c3 * h, y3)) {
            rhs(s + c3 * h, y3, k3);
            y4 = axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        }
        if (!outside && inside(s + c4 * h, y4)) {
            rhs(s + c4 * h, y4, k4);
            y5 = axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        }
        if (!outside && inside(s + c5 * h, y5)) {
            rhs(s + c5 * h, y5, k5);
            y6 = axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        }
        if (!outside && inside(s + h, y6)) {
            rhs(s + h, y6, k6);
            yn = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        }
        if (!outside && inside(s + h, yn)) rhs(s + h, yn, k7);
        if (outside) {
            if (++shrink_for_domain > 30 || std::abs(h) < 1e-9 * std::max(1.0, std::abs(s))) {
                tr.exited = true;
                break;
            }
            h *= 0.5;
            continue;
        }
        // embedded error estimate
        double err = 0.0;
        for (int i = 0; i < 3; ++i) {
            double ex = h * (e1 * k1.X[i] + e3 * k3.X[i] + e4 * k4.X[i] + e5 * k5.X[i] + e6 * k6.X[i] + e7 * k7.X[i]);
            double ev = h * (e1 * k1.V[i] + e3 * k3.V[i] + e4 * k4.V[i] + e5 * k5.V[i] + e6 * k6.V[i] + e7 * k7.V[i]);
            double sx = tol * (1.0 + std::max(std::abs(y.X[i]), std::abs(yn.X[i])));
            double sv = tol * (1.0 + std::max(std::abs(y.V[i]), std::abs(yn.V[i])));
            err = std::max({err, std::abs(ex) / sx, std::abs(ev) / sv});
        }
        if (!std::isfinite(err)) throw NumericalError("non-finite error estimate at s = " + std::to_string(s));
        if (err <= 1.0) {
            s = last ? s_target : s + h;
            y = yn;
            k1 = k7;
            out.push_back({s, y.X, y.V, k1.X, k1.V});
            shrink_for_domain = 0;
            double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h *= fac;
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            if (std::abs(h) < h_floor) throw StepUnderflow(s);
        }
    }
    if (dir < 0) std::reverse(out.begin(), out.end());
    tr.knots = std::move(out);
    return tr;
}

Intersection retarded_intersection(const Trajectory& tr, const SpacetimePoint& obs, double tol, double coincident_r,
                                   std::size_t* hint) {
    Intersection res;
    const auto& K = tr.knots;
    if (K.empty()) return res;
    auto g_knot = [&](std::size_t i) { return K[i].s + norm(K[i].X - obs.x) - obs.t; };
    double g0 = g_knot(0);
    if (g0 > 0.0) return res;
    std::size_t hi_idx = K.size() - 1;
    // restrict to s <= t_obs
    if (K[hi_idx].s > obs.t) {
        auto it = std::upper_bound(K.begin(), K.end(), obs.t, [](double v, const Knot& k) { return v < k.s; });
        hi_idx = static_cast<std::size_t>(it - K.begin());  // first knot with s > t_obs
    }
    auto finish = [&](double s, std::size_t seg, int iters) {
        PhaseState p = K.size() == 1 ? PhaseState{K[0].X, K[0].V} : tr.at_segment(seg, s);
        Vec3 d = p.x - obs.x;
        double r = norm(d);
        res.found = true;
        res.s = s;
        res.r = r;
        res.X = p.x;
        res.V = p.v;
        res.omega = r > 0 ? d / r : Vec3{};
        res.coincident = r < coincident_r;
        res.iterations = iters;
        double a = 1.0 + dot(hat_velocity(p.v), res.omega);
        if (!(a > 0.0)) throw NumericalError("retardation factor not positive");
        return res;
    };
    if (g0 == 0.0) return finish(K[0].s, 0, 0);
    if (K.size() == 1) return res;
    // crossing beyond the covered range (path ended or left the domain)
    if (g_knot(hi_idx) < 0.0) return res;
    // bracket over knot indices: g(K[lo]) < 0 <= g(K[hi])
    std::size_t lo = 0, hi = hi_idx;
    if (hint && *hint > 0 && *hint < hi_idx && g_knot(*hint) < 0.0) {
        // gallop forward from the previous bracket
        lo = *hint;
        std::size_t step = 1;
        while (lo + step < hi_idx && g_knot(lo + step) < 0.0) {
            lo += step;
            step *= 2;
        }
        hi = std::min(lo + step, hi_idx);
    }
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (g_knot(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (hint) *hint = lo;
    double a = K[lo].s, b = K[hi].s;
    double ga = g_knot(lo), gb = g_knot(hi);
    if (gb == 0.0) return finish(b, lo, 0);
    auto g = [&](double s) { return s + norm(tr.position_segment(lo, s) - obs.x) - obs.t; };
    // Illinois-modified regula falsi with bisection fallback
    int side = 0;
    double s = a;
    for (int it = 1; it <= 200; ++it) {
        double cand = (a * gb - b * ga) / (gb - ga);
        if (!(cand > a && cand < b)) cand = 0.5 * (a + b);
        if (it % 8 == 0) cand = 0.5 * (a + b);
        s = cand;
        double gs = g(s);
        if (std::abs(gs) <= tol || (b - a) <= tol) return finish(s, lo, it);
        if (gs < 0.0) {
            a = s;
            ga = gs;
            if (side == -1) gb *= 0.5;
            side = -1;
        } else {
            b = s;
            gb = gs;
            if (side == 1) ga *= 0.5;
            side = 1;
        }
    }
    throw RootNotConverged("retarded intersection did not converge");
}

VelocityBoundReport velocity_bound_report(const std::vector<Trajectory>& trajs, double K0) {
    VelocityBoundReport rep;
    rep.L = K0 * std::log(2.0 + K0);
    const double L = rep.L;
    for (const auto& tr : trajs) {
        double run_min = std::numeric_limits<double>::infinity(), run_max = 0.0;
        for (const auto& k : tr.knots) {
            double a = norm(k.V) + L;
            if (run_min < std::numeric_limits<double>::infinity()) {
                if (a > 0.0 && run_min > 0.0) rep.forward_ratio = std::max(rep.forward_ratio, a / run_min);
                if (a > 0.0) rep.backward_ratio = std::max(rep.backward_ratio, run_max / a);
            }
            run_min = std::min(run_min, a);
            run_max = std::max(run_max, a);
        }
    }
    return rep;
}

void write_trajectory(std::ostream& os, const Trajectory& tr) {
    binio::put_u64(os, tr.knots.size());
    for (const auto& k : tr.knots) {
        binio::put_f64(os, k.s);
        for (int i = 0; i < 3; ++i) binio::put_f64(os, k.X[i]);
        for (int i = 0; i < 3; ++i) binio::put_f64(os, k.V[i]);
    }
}

Trajectory read_trajectory(std::istream& is) {
    Trajectory tr;
    std::uint64_t n = binio::get_u64(is);
    if (n > (1ULL << 32)) throw IoError("implausible knot count in trajectory");
    tr.knots.resize(n);
    for (auto& k : tr.knots) {
        k.s = binio::get_f64(is);
        for (int i = 0; i < 3; ++i) k.X[i] = binio::get_f64(is);
        for (int i = 0; i < 3; ++i) k.V[i] = binio::get_f64(is);
        k.dX = hat_velocity(k.V);
    }
    // the format carries no forcing; rebuild dV/ds by differences of V
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 < n ? i + 1 : i;
        if (a == b) continue;
        tr.knots[i].dV = (tr.knots[b].V - tr.knots[a].V) / (tr.knots[b].s - tr.knots[a].s);
    }
    if (n > 0) {
        tr.t_end = tr.knots.back().s;
        tr.x_end = tr.knots.back().X;
        tr.v_end = tr.knots.back().V;
    }
    return tr;
}

}  // namespace rvm
