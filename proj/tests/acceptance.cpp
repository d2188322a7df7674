// Acceptance suite: one line per criterion, "PASS" or "FAIL" with the measured values.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rvm/cli.hpp"
#include "rvm/config.hpp"
#include "rvm/iteration.hpp"
#include "rvm/kernels.hpp"
#include "rvm/parallel.hpp"
#include "rvm/quadrature.hpp"
#include "rvm/verify.hpp"

using namespace rvm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path work;
    int workers = 1;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path config_path(const std::string& name) { return fs::path(RVM_SOURCE_DIR) / "configs" / name; }

Vec3 random_in_ball(std::uint64_t& st, double R) {
    for (;;) {
        Vec3 p{2 * uniform01(st) - 1, 2 * uniform01(st) - 1, 2 * uniform01(st) - 1};
        if (norm2(p) <= 1.0) return R * p;
    }
}

// ---------------------------------------------------------------------------

Outcome free_streaming(const Context&) {
    ZeroField z;
    std::uint64_t st = 101;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double t = 10.0 * (1.0 - uniform01(st));
        Vec3 x = random_in_ball(st, 10.0), v = random_in_ball(st, 20.0);
        Trajectory tr = integrate_characteristic(z, t, {x, v}, 0.0, 1e-9);
        worst = std::max(worst, norm(tr.knots.front().X - (x - t * hat_velocity(v))));
    }
    return {worst < 1e-8, fmt("max |X(0) - (x - t vhat)| = %.2e over 1000 endpoints (limit 1e-8)", worst)};
}

Outcome gyromotion(const Context&) {
    UniformField f({{0, 0, 0}, {0, 0, 1}});
    std::uint64_t st = 202;
    double drift = 0.0, period_err = 0.0;
    for (int i = 0; i < 8; ++i) {
        Vec3 v = random_in_ball(st, 4.0);
        if (std::hypot(v.x, v.y) < 0.2) v.x += 0.5;
        const double T = 2 * kPi * lorentz_factor(v);
        // speed drift: the error control is per step and the drift grows with the step count; 1e-11 here
        Trajectory fine = integrate_characteristic(f, 0.0, {{0, 0, 0}, v}, 10 * T, 1e-11);
        for (const Knot& k : fine.knots) drift = std::max(drift, std::abs(norm(k.V) - norm(v)));
        // phase mismatch after ten closed-form periods, as a relative period error
        Trajectory tr = integrate_characteristic(f, 0.0, {{0, 0, 0}, v}, 10 * T, 1e-9);
        double dphi = norm(tr.knots.back().V - v) / std::hypot(v.x, v.y);
        period_err = std::max(period_err, dphi / (2 * kPi * 10));
    }
    return {drift < 1e-8 && period_err < 1e-6,
            fmt("|V| drift %.2e (limit 1e-8), relative period error %.2e (limit 1e-6)", drift, period_err)};
}

Outcome kernel_bounds(const Context&) {
    KernelBoundReport r = kernel_bound_check(1000000, 1e3, 7);
    std::size_t v = r.violations[0] + r.violations[1] + r.violations[2] + r.violations[3];
    return {v == 0, fmt("%zu samples, violations kT %zu kz %zu grad_v d %zu |w+vhat|^2 %zu; worst ratios %.4f %.4f %.4f %.4f",
                        r.samples, r.violations[0], r.violations[1], r.violations[2], r.violations[3],
                        r.worst_ratio[0], r.worst_ratio[1], r.worst_ratio[2], r.worst_ratio[3])};
}

Outcome sphere_bounds(const Context&) {
    std::vector<SphereBoundSample> smp;
    std::uint64_t st = 303;
    for (int i = 0; i < 1000; ++i) {
        SphereBoundSample s;
        s.t = 40.0 * uniform01(st);
        Vec3 d = random_in_ball(st, 1.0);
        s.x = (80.0 * uniform01(st) / std::max(norm(d), 1e-12)) * d;
        s.k_exp = 2 + static_cast<int>(4 * uniform01(st));
        smp.push_back(s);
    }
    SphereBoundReport r = sphere_integral_bound_check(smp, 1e-4, {24, 48, true});
    return {r.violations == 0 && r.checked > 0,
            fmt("%zu samples (%zu checked), %zu violations, worst integral/bound %.4f", r.samples, r.checked,
                r.violations, r.worst_ratio)};
}

// Shared tiny configuration for the particle-sum oracles: Gaussian data, a
// uniform magnetic K_prev (so the transported density is closed form), t = 2.
struct Tiny {
    InitialData data = make_gaussian_scenario(1e-3, 1.5, 10.0, 1);
    double Bz = 0.5;
    UniformField K{FieldSample{{0, 0, 0}, {0, 0, 0.5}}};
    Decomposition dec;
    std::vector<ParticleEnsemble> ens;

    explicit Tiny(std::size_t N, std::uint64_t seed = 11) {
        dec = decompose(data, 4);
        double M = 0.0;
        for (const auto& c : dec.components)
            if (!c.empty) M += c.mass_estimate;
        // particles allotted in proportion to shell mass
        for (const auto& c : dec.components)
            if (!c.empty)
                ens.push_back(sample_particles(
                    c, std::max<std::size_t>(1000, static_cast<std::size_t>(N * c.mass_estimate / M)), seed));
    }
    DensityFn density() const { return gyration_density(data.f0, Bz); }
};

Outcome d1_oracle(const Context& ctx) {
    Tiny tiny(1000000);
    ObserverSet obs;
    for (double a : {-1.0, -0.5, 0.0, 0.5, 1.0})
        for (double b : {-1.0, -0.5, 0.0, 0.5, 1.0})
            for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) obs.xs.push_back({a, b, c});
    obs.ts = {2.0};
    const double r_min = 0.25;
    ConeOptions opt;
    opt.r_min = r_min;
    opt.ode_tol = 1e-9;
    std::size_t n = 0;
    for (const auto& e : tiny.ens) n += e.particles.size();
    auto cs = cone_fields(tiny.ens, tiny.K, &tiny.K, obs, opt, nullptr, ctx.workers);
    OracleConfig oc;
    oc.r_min = r_min;
    const DensityFn dens = tiny.density();
    double mT = 0, dT = 0, mS = 0, dS = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        SpacetimePoint p = obs.at(i);
        ConeTerms o = cone_quadrature_oracle(dens, &tiny.K, p, oc, ctx.workers);
        double w = decay_weight(p.t, p.x);
        mT = std::max(mT, w * norm(o.ET));
        dT = std::max(dT, w * norm(o.ET - cs[i].ET));
        mS = std::max(mS, w * norm(o.ES));
        dS = std::max(dS, w * norm(o.ES - cs[i].ES));
    }
    double eT = dT / mT, eS = dS / mS;
    return {eT < 0.02 && eS < 0.02,
            fmt("%zu particles, 125 observers at t = 2, r >= %.2f: weighted max relative error E_T %.2f%%, E_S %.2f%% "
                "(limit 2%%)",
                n, r_min, 100 * eT, 100 * eS)};
}

Outcome d2_maxwell(const Context& ctx) {
    const std::vector<SpacetimePoint> probes{
        {1.0, {0.3, 0.2, -0.1}}, {1.0, {-0.5, 0.4, 0.3}}, {1.2, {0.8, -0.3, 0.2}}, {0.9, {0.0, 0.0, 0.6}}};
    const std::vector<double> hs{0.2, 0.1, 0.05};
    OracleConfig oc;
    oc.r_min = 0.0;
    oc.cone_vel = {6.0, 20, 10, 20};
    auto residuals = [&](const InitialData& d, bool with_density) {
        DataField df(d, {24, 48, true}, {6.0, 12, 8, 16});
        const DensityFn dens = gyration_density(d.f0, 0.0);
        // iterate 1: particles stream freely, K_prev = 0, so only the transport cone terms enter
        FunctionField F([&](double t, const Vec3& x) {
            FieldSample k = df(t, x);
            if (with_density) k += cone_quadrature_oracle(dens, nullptr, {t, x}, oc, ctx.workers).total();
            return k;
        });
        SourceFn src = [&](double t, const Vec3& x) {
            return with_density ? velocity_moments(dens, t, x, oc.cone_vel) : ChargeCurrent{};
        };
        std::vector<ResidualNorms> out;
        for (double h : hs) out.push_back(maxwell_residual(F, src, probes, {h, h}, 1));
        return out;
    };
    auto gauss = residuals(make_gaussian_scenario(1e-3, 1.5, 10.0, 1), true);
    auto vac = residuals(make_vacuum_scenario(1.5, 1), false);
    bool ok = true;
    std::string d = "orders";
    const char* names[4] = {"ampere", "gauss", "faraday", "divB"};
    for (int e = 0; e < 4; ++e) {
        double order = std::log(gauss[0].max[e] / gauss[2].max[e]) / std::log(hs[0] / hs[2]);
        ok = ok && order >= 1.0;
        d += fmt(" %s %.2f", names[e], order);
    }
    double floor = vac[2].max[3];
    ok = ok && gauss[2].max[3] < 10.0 * floor;
    d += fmt("; finest residuals %.2e %.2e %.2e %.2e; divB %.2e vs vacuum floor %.2e (limit 10x)", gauss[2].max[0],
             gauss[2].max[1], gauss[2].max[2], gauss[2].max[3], gauss[2].max[3], floor);
    return {ok, d};
}

Outcome momentum(const Context& ctx) {
    RunConfig cfg = load_config(config_path("desk.ini").string());
    InitialData data = make_scenario(cfg);
    Decomposition dec = decompose(data, cfg.k_max, cfg.tail_tolerance);
    // push field: the linear field on a box holding every path that reaches the ball |y - x| <= 4
    GridSpec g;
    g.t0 = 0.0;
    g.t1 = 4.0;
    g.nt = 9;
    g.R = 10.0;
    g.nx = 21;
    FieldCache K = build_field_cache(
        [&](const SpacetimePoint& p) { return kirchhoff_linear(data, p.t, p.x, {24, 48, true}); }, g, ctx.workers);
    const Vec3 x{0.5, 0.3, -0.2};
    OracleConfig oc;
    double worst = 0.0;
    std::string rows;
    for (const auto& c : dec.components) {
        if (c.empty) continue;
        PushedEnsemble pe = push_ensemble(sample_particles(c, 100000, cfg.seed), K, 4.0, cfg.ode_tol, ctx.workers);
        for (double t : {1.0, 2.0, 4.0}) {
            MomentumCheck m = momentum_conservation_check(pe, c, {t, x}, oc, ctx.workers);
            worst = std::max(worst, m.rel_err);
            rows += fmt(" k%d/t%g %.3f%%", c.k, t, 100 * m.rel_err);
        }
    }
    return {worst < 0.01, fmt("relative error per shell and t:%s (limit 1%%)", rows.c_str())};
}

Outcome vacuum(const Context& ctx) {
    RunConfig cfg = load_config(config_path("vacuum.ini").string());
    InitialData data = make_scenario(cfg);
    IterationOptions o;
    o.workers = ctx.workers;
    IterationResult r = run_iteration(cfg, data, o);
    const GridSpec g = grid_spec(cfg);
    const SphereConfig sph = sphere_config(cfg);
    // the run against a cache of the Kirchhoff field on the same grid, and against the pointwise field
    FieldCache lin = build_field_cache([&](const SpacetimePoint& p) { return kirchhoff_linear(data, p.t, p.x, sph); },
                                       g, ctx.workers);
    auto probes = k0_probes(g, 2048);
    double same = 0.0, interp = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& p = probes[i];
        double w = decay_weight(p.t, p.x);
        FieldSample a = r.field.sample(p.t, p.x);
        same = std::max(same, w * magnitude(a - lin.sample(p.t, p.x)));
        if (i % 8 == 0) interp = std::max(interp, w * magnitude(a - kirchhoff_linear(data, p.t, p.x, sph)));
        scale = std::max(scale, w * magnitude(a));
    }
    // the interpolation tolerance is the error of the exact field's own cache; it must shrink with the spacing
    GridSpec g2 = g;
    g2.nt = 2 * g.nt - 1;
    g2.nx = 2 * g.nx - 1;
    FieldCache fine = build_field_cache([&](const SpacetimePoint& p) { return kirchhoff_linear(data, p.t, p.x, sph); },
                                        g2, ctx.workers);
    double interp_fine = 0.0;
    for (std::size_t i = 0; i < probes.size(); i += 8) {
        const auto& p = probes[i];
        interp_fine = std::max(interp_fine, decay_weight(p.t, p.x) *
                                                magnitude(fine.sample(p.t, p.x) -
                                                          kirchhoff_linear(data, p.t, p.x, sph)));
    }
    // norm / M on the run grid, at 2/3 and at 1/2 of its spacing
    GridSpec gm = g;
    gm.nt = (g.nt - 1) * 3 / 2 + 1;
    gm.nx = (g.nx - 1) * 3 / 2 + 1;
    FieldCache mid = build_field_cache([&](const SpacetimePoint& p) { return kirchhoff_linear(data, p.t, p.x, sph); },
                                       gm, ctx.workers);
    std::vector<double> ratio;
    for (const FieldCache* c : {&lin, &mid, &fine}) ratio.push_back(estimate_norm_K0(*c, probes).K0 / data.M);
    double spread = 0.0;
    for (double q : ratio) spread = std::max(spread, std::abs(q / ratio.back() - 1));
    bool ok = r.history.size() >= 1 && same <= 1e-12 * scale && interp_fine <= 0.5 * interp && spread <= 0.15;
    return {ok, fmt("%zu iterates, d_2 = %.1e; run vs Kirchhoff cache %.1e; vs pointwise field %.2e (%.2f%% of the "
                    "norm; %.2e at half spacing, limit half); norm/M on three grids %.4f %.4f %.4f (max deviation from the finest %.1f%%, limit 15%%)",
                    r.history.size(), r.history.size() > 1 ? r.history[1].d_n : -1.0, same, interp,
                    100 * interp / scale, interp_fine, ratio[0], ratio[1], ratio[2], 100 * spread)};
}

// The desk run shared by criteria 9-11; reused when a completed run with the same configuration exists.
fs::path desk_run(const Context& ctx, double* seconds) {
    const fs::path cfg = config_path("desk.ini");
    const fs::path dir = ctx.work / "desk";
    const std::string text = serialize_config(load_config(cfg.string()));
    *seconds = -1.0;
    if (fs::exists(dir / "decay_fit.json") && slurp(dir / "config.ini") == text) return dir;
    bool resume = fs::exists(dir / "config.ini") && slurp(dir / "config.ini") == text;
    if (!resume) fs::remove_all(dir);
    if (resume) {
        try {
            cli::latest_manifest(dir.string());
        } catch (const IoError&) {
            fs::remove_all(dir);
            resume = false;
        }
    }
    auto t0 = std::chrono::steady_clock::now();
    int rc = cli::cmd_run(cfg.string(), dir.string(), {resume, false});
    *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rc != 0) throw NumericalError(fmt("desk run exited with %d", rc));
    return dir;
}

Outcome density_decay(const Context& ctx) {
    double secs;
    fs::path dir = desk_run(ctx, &secs);
    auto fit = nlohmann::json::parse(slurp(dir / "decay_fit.json"));
    auto m = nlohmann::json::parse(slurp(cli::latest_manifest(dir.string())));
    int n = m.at("n").get<int>();
    if (fit["slope"].is_null()) return {false, "decay fit failed: " + fit.value("note", std::string())};
    double s = fit["slope"].get<double>(), w = fit["width"].get<double>();
    bool ok = s >= -3.5 && s <= -2.5 && n >= 3;
    double iter_secs = 0.0;
    for (const auto& r : m.at("history")) iter_secs += r.at("seconds").get<double>();
    std::string run = secs >= 0 ? fmt("run took %.0f s", secs)
                                : fmt("reused run, iterates took %.0f s", iter_secs);
    return {ok, fmt("slope of int f dv at x = 0 over t in [5, 40]: %.3f +- %.3f (target [-3.5, -2.5]), %d iterates, "
                    "%s",
                    s, w, n, run.c_str())};
}

Outcome field_decay(const Context& ctx) {
    double secs;
    fs::path dir = desk_run(ctx, &secs);
    auto m = nlohmann::json::parse(slurp(cli::latest_manifest(dir.string())));
    const double Lambda = m.at("Lambda").get<double>();
    bool ok = true;
    std::string rows;
    for (const auto& r : m.at("history")) {
        double k0 = r.at("norms").at("K0").get<double>();
        ok = ok && std::isfinite(k0) && k0 <= Lambda;
        rows += fmt(" %.4f", k0);
    }
    return {ok, fmt("sampled weighted sup per iterate:%s; Lambda %.4f", rows.c_str(), Lambda)};
}

Outcome contraction(const Context& ctx) {
    double secs;
    fs::path dir = desk_run(ctx, &secs);
    auto m = nlohmann::json::parse(slurp(cli::latest_manifest(dir.string())));
    std::vector<double> d;
    for (const auto& r : m.at("history")) d.push_back(r.at("d_n").get<double>());
    bool ok = d.size() >= 3;
    std::string rows;
    for (std::size_t i = 0; i < d.size(); ++i) rows += fmt(" %.3e", d[i]);
    double worst = 0.0;
    // n >= 2: d_{n+1} <= d_n / 2
    for (std::size_t i = 1; i + 1 < d.size(); ++i) {
        double q = d[i + 1] / d[i];
        worst = std::max(worst, q);
        ok = ok && q <= 0.5;
    }
    return {ok, fmt("d_n:%s; worst ratio d_{n+1}/d_n for n >= 2: %.3g (limit 0.5)", rows.c_str(), worst)};
}

Outcome gradient(const Context& ctx) {
    // 8 independent batches of 10^6 particles; every term is linear in the weights, so the batch
    // mean is the estimate of the pooled ensemble
    const int batches = 8;
    const double a = 0.5, b = 1.5, h = 0.1;
    const std::vector<Vec3> xs{{0.3, -0.2, 0.1}, {-0.6, 0.4, 0.2}, {0.9, 0.5, -0.4}};
    ConeOptions opt;
    opt.r_lo = a;
    opt.r_hi = b;
    opt.r_min = 0.0;
    std::vector<Mat3> A(xs.size(), Mat3{}), FD(xs.size(), Mat3{});
    for (int bt = 0; bt < batches; ++bt) {
        Tiny tiny(1000000, 11 + bt);
        std::vector<PushedEnsemble> pushed;
        for (const auto& e : tiny.ens) pushed.push_back(push_ensemble(e, tiny.K, 2.0, 1e-9, ctx.workers));
        const DensityFn dens = tiny.density();
        for (std::size_t q = 0; q < xs.size(); ++q) {
            const Vec3 x = xs[q];
            Mat3 g = gradient_decomposition_ET(pushed, {2.0, x}, &tiny.K, a, b, dens, {24, 48, true},
                                               {5.0, 16, 8, 16}, opt)
                         .total();
            for (int l = 0; l < 3; ++l) {
                Vec3 e{};
                e[l] = h;
                Vec3 p = cone_field_ET(pushed, {2.0, x + e}, opt), m = cone_field_ET(pushed, {2.0, x - e}, opt);
                for (int i = 0; i < 3; ++i) {
                    FD[q][i][l] += (p[i] - m[i]) / (2 * h) / batches;
                    A[q][i][l] += g[i][l] / batches;
                }
            }
        }
    }
    double worst = 0.0;
    std::string rows;
    for (std::size_t q = 0; q < xs.size(); ++q) {
        double num = 0, den = 0;
        for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l) {
                num += (A[q][i][l] - FD[q][i][l]) * (A[q][i][l] - FD[q][i][l]);
                den += FD[q][i][l] * FD[q][i][l];
            }
        double rel = std::sqrt(num / den);
        worst = std::max(worst, rel);
        rows += fmt(" %.2f%%", 100 * rel);
    }
    return {worst < 0.05, fmt("A_w + A_TT + A_TS vs central differences of E_T on r in [%.1f, %.1f], step %.2f, "
                              "%d x 10^6 particles, three observers at t = 2:%s (limit 5%%)",
                              a, b, h, batches, rows.c_str())};
}

Outcome measure(const Context&) {
    double cmin = 1e300, cmax = 0.0, worst_gap = 0.0;
    std::string rows;
    for (double P : {2.0, 4.0, 8.0})
        for (double delta : {0.05, 0.1, 0.2}) {
            double c = 0.0;
            for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                Vec3 vc{f * P * 0.6, f * P * 0.48, f * P * 0.64};
                MeasureEstimate e = schaeffer_measure_check(P, delta, 200000, vc, 5);
                c = std::max(c, e.ratio);
                if (f == 0.5 || f == 0.0) {
                    double grid = schaeffer_measure_grid(P, delta, vc, 96);
                    worst_gap = std::max(worst_gap, std::abs(e.mu - grid) / grid);
                }
            }
            cmin = std::min(cmin, c);
            cmax = std::max(cmax, c);
            rows += fmt(" %.3g", c);
        }
    bool ok = cmax / cmin <= 10.0 && worst_gap <= 0.05;
    return {ok, fmt("fitted constants over P in {2,4,8} x delta in {.05,.1,.2}:%s; max/min %.1f (limit 10); grid vs "
                    "MC worst gap %.2f%% (limit 5%%)",
                    rows.c_str(), cmax / cmin, 100 * worst_gap)};
}

Outcome determinism(const Context& ctx) {
    const fs::path cfg = config_path("tiny.ini");
    fs::path a = ctx.work / "det_a", b = ctx.work / "det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    int ra = cli::cmd_run(cfg.string(), a.string(), {false, true});
    int rb = cli::cmd_run(cfg.string(), b.string(), {false, true});
    if (ra != 0 || rb != 0) return {false, fmt("runs exited with %d and %d", ra, rb)};
    std::size_t files = 0, same = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        ++files;
        if (slurp(e.path()) == slurp(b / e.path().filename())) ++same;
    }
    return {files > 0 && same == files, fmt("%zu of %zu CSV files byte-identical across two runs", same, files)};
}

struct Criterion {
    const char* title;
    double budget;  // seconds
    std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    int only = 0;
    std::string work = "acceptance_work";
    app.add_option("--criterion", only, "run only this criterion (1-14)");
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);

    Context ctx;
    ctx.work = work;
    ctx.workers = worker_count();
    fs::create_directories(ctx.work);

    // the 2 h budget of criterion 9 is stated for 8 cores
    const double desk_budget = 7200.0 * 8.0 / std::min(8, ctx.workers);
    const std::map<int, Criterion> all{
        {1, {"free streaming exactness", 5, free_streaming}},
        {2, {"gyromotion oracle", 5, gyromotion}},
        {3, {"kernel bounds", 10, kernel_bounds}},
        {4, {"sphere integral bounds", 30, sphere_bounds}},
        {5, {"particle cone sums vs grid quadrature", 600, d1_oracle}},
        {6, {"Maxwell residual of the assembled field", 1200, d2_maxwell}},
        {7, {"momentum conservation per shell", 300, momentum}},
        {8, {"vacuum reduction", 300, vacuum}},
        {9, {"density decay rate", desk_budget, density_decay}},
        {10, {"field decay shape", desk_budget, field_decay}},
        {11, {"contraction surrogate", desk_budget, contraction}},
        {12, {"gradient decomposition", 600, gradient}},
        {13, {"measure family", 60, measure}},
        {14, {"determinism", 600, determinism}},
    };
    int failed = 0;
    for (const auto& [id, c] : all) {
        if (only != 0 && id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_time = secs <= c.budget;
        bool pass = o.pass && in_time;
        std::printf("criterion %2d %s  %s: %s [%.1f s, budget %.0f s%s]\n", id, pass ? "PASS" : "FAIL", c.title,
                    o.detail.c_str(), secs, c.budget, in_time ? "" : ", over budget");
        std::fflush(stdout);
        if (!pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
