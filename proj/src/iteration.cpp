#include "rvm/iteration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "rvm/binary_io.hpp"
#include "rvm/parallel.hpp"
#include "rvm/quadrature.hpp"

namespace rvm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {
constexpr double kPi = 3.14159265358979323846;

Vec3 unit_from(double u, double w) {
    double z = 2.0 * u - 1.0, ph = 2.0 * kPi * w;
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(ph), s * std::sin(ph), z};
}

void log(const IterationOptions& opt, const std::string& msg) {
    if (opt.log) opt.log(msg);
}
}  // namespace

double decay_weight(double t, const Vec3& x) {
    double r = norm(x);
    return (std::abs(t - r) + 1.0) * (t + r + 1.0);
}

std::vector<SpacetimePoint> k0_probes(const GridSpec& g, std::size_t n) {
    std::vector<SpacetimePoint> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t j = i + 1;
        out[i].t = g.t0 + (g.t1 - g.t0) * radical_inverse(j, 2);
        out[i].x = {g.R * (2.0 * radical_inverse(j, 3) - 1.0), g.R * (2.0 * radical_inverse(j, 5) - 1.0),
                    g.R * (2.0 * radical_inverse(j, 7) - 1.0)};
    }
    return out;
}

std::vector<ProbePair> k1a_probe_pairs(const GridSpec& g, std::size_t n) {
    std::vector<ProbePair> out(n);
    const int bases[7] = {2, 3, 5, 7, 11, 13, 17};
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t j = i + 1;
        double u[7];
        for (int d = 0; d < 7; ++d) u[d] = radical_inverse(j, bases[d]);
        ProbePair p;
        p.t = g.t0 + (g.t1 - g.t0) * u[0];
        double ry = std::min(p.t, g.R) * std::cbrt(u[1]);
        double rx = ry * std::cbrt(u[4]);
        p.y = ry * unit_from(u[2], u[3]);
        p.x = rx * unit_from(u[5], u[6]);
        out[i] = p;
    }
    return out;
}

NormReport estimate_norm_K0(const FieldOracle& field, std::span<const SpacetimePoint> probes) {
    NormReport rep;
    rep.k0_samples = probes.size();
    for (const auto& p : probes) {
        double v = decay_weight(p.t, p.x) * magnitude(field.sample(p.t, p.x));
        if (v > rep.K0) {
            rep.K0 = v;
            rep.k0_witness = p;
        }
    }
    return rep;
}

void estimate_norm_K1alpha(const FieldOracle& field, std::span<const ProbePair> pairs, double alpha,
                           NormReport& rep) {
    rep.k1a_samples = pairs.size();
    rep.K1a = 0.0;
    for (const auto& p : pairs) {
        double rx = norm(p.x), ry = norm(p.y);
        if (!(rx <= ry * (1.0 + 1e-12) && ry <= p.t * (1.0 + 1e-12)))
            throw std::invalid_argument("K1a probe pair violates |x| <= |y| <= t");
        FieldSample a = field.sample(p.t, p.x), b = field.sample(p.t, p.y);
        // the B difference is taken at equal times, B(t,x) - B(t,y)
        double diff = norm(a.E - b.E) + norm(a.B - b.B);
        double v = std::pow(p.t - ry + 1.0, 1.0 + alpha) * (p.t + 1.0) * diff / (norm(p.x - p.y) + 1.0);
        if (v > rep.K1a) {
            rep.K1a = v;
            rep.k1a_witness = p;
        }
    }
}

Membership membership_check(const NormReport& rep, double Lambda) {
    if (!(Lambda > 2.0)) throw std::invalid_argument("membership_check: Lambda must exceed 2");
    Membership m;
    m.k0_ok = rep.K0 <= Lambda;
    m.k1a_ok = rep.K1a <= Lambda * Lambda;
    m.pass = m.k0_ok && m.k1a_ok;
    return m;
}

double sup_difference(const FieldOracle& a, const FieldOracle& b, std::span<const SpacetimePoint> probes,
                      SpacetimePoint* witness) {
    double best = 0.0;
    for (const auto& p : probes) {
        double v = decay_weight(p.t, p.x) * magnitude(a.sample(p.t, p.x) - b.sample(p.t, p.x));
        if (v > best) {
            best = v;
            if (witness) *witness = p;
        }
    }
    return best;
}

double kinetic_energy_density(std::span<const WeightedState> states, const Vec3& x, double h) {
    double acc = 0.0;
    for (const auto& s : states) acc += s.w * norm(s.v) * wendland(norm(s.x - x), h);
    return acc;
}

ConeOptions cone_options(const RunConfig& cfg) {
    ConeOptions o;
    o.r_min = cfg.r_min;
    o.root_tol = cfg.root_tol;
    o.ode_tol = cfg.ode_tol;
    return o;
}

SphereConfig sphere_config(const RunConfig& cfg) { return {cfg.sphere_ntheta, cfg.sphere_nphi, true}; }

VelocityConfig velocity_config(const RunConfig& cfg) {
    return {cfg.vel_radius, cfg.vel_nr, cfg.vel_ntheta, cfg.vel_nphi};
}

GridSpec grid_spec(const RunConfig& cfg) { return {0.0, cfg.t_max, cfg.nt, cfg.box_radius, cfg.nx}; }

std::vector<ParticleEnsemble> initial_ensembles(const RunConfig& cfg, const Decomposition& dec) {
    std::vector<ParticleEnsemble> out;
    for (const auto& c : dec.components) {
        if (c.empty) continue;
        std::uint64_t st = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(c.k);
        std::uint64_t seed = splitmix64(st);
        out.push_back(sample_particles(c, cfg.particles_per_shell, seed, cfg.sampler));
    }
    return out;
}

std::string iterate_dir(const std::string& root, int n) {
    std::ostringstream os;
    os << "iter_" << std::setw(3) << std::setfill('0') << n;
    return (fs::path(root) / os.str()).string();
}

namespace {

json norms_json(const NormReport& r) {
    return {{"K0", r.K0},
            {"K1a", r.K1a},
            {"k0_samples", r.k0_samples},
            {"k1a_samples", r.k1a_samples},
            {"k0_witness", {r.k0_witness.t, r.k0_witness.x.x, r.k0_witness.x.y, r.k0_witness.x.z}},
            {"k1a_witness",
             {r.k1a_witness.t, r.k1a_witness.x.x, r.k1a_witness.x.y, r.k1a_witness.x.z, r.k1a_witness.y.x,
              r.k1a_witness.y.y, r.k1a_witness.y.z}}};
}

NormReport norms_from(const json& j) {
    NormReport r;
    r.K0 = j.at("K0");
    r.K1a = j.at("K1a");
    r.k0_samples = j.at("k0_samples");
    r.k1a_samples = j.at("k1a_samples");
    auto w = j.at("k0_witness");
    r.k0_witness = {w[0], {w[1], w[2], w[3]}};
    auto p = j.at("k1a_witness");
    r.k1a_witness = {p[0], {p[1], p[2], p[3]}, {p[4], p[5], p[6]}};
    return r;
}

json record_json(const IterateRecord& r) {
    return {{"n", r.n},
            {"norms", norms_json(r.norms)},
            {"d_n", r.d_n},
            {"kinetic_max", r.kinetic_max},
            {"membership", {{"pass", r.member.pass}, {"k0_ok", r.member.k0_ok}, {"k1a_ok", r.member.k1a_ok}}},
            {"tally",
             {{"crossings", r.tally.crossings},
              {"dropped", r.tally.dropped},
              {"dropped_weight", r.tally.dropped_weight},
              {"absorbed", r.tally.absorbed}}},
            {"seconds", r.seconds}};
}

IterateRecord record_from(const json& j) {
    IterateRecord r;
    r.n = j.at("n");
    r.norms = norms_from(j.at("norms"));
    r.d_n = j.at("d_n");
    r.kinetic_max = j.at("kinetic_max");
    r.member.pass = j.at("membership").at("pass");
    r.member.k0_ok = j.at("membership").at("k0_ok");
    r.member.k1a_ok = j.at("membership").at("k1a_ok");
    r.tally.crossings = j.at("tally").at("crossings");
    r.tally.dropped = j.at("tally").at("dropped");
    r.tally.dropped_weight = j.at("tally").at("dropped_weight");
    r.tally.absorbed = j.at("tally").at("absorbed");
    r.seconds = j.at("seconds");
    return r;
}

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_checkpoint(const IterationOptions& opt, const RunConfig& cfg, const IterationResult& res,
                      const std::vector<ParticleEnsemble>& ens, const std::vector<std::vector<Trajectory>>& trajs) {
    const IterateRecord& rec = res.history.back();
    std::string dir = iterate_dir(opt.checkpoint_dir, rec.n);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    res.field.write((fs::path(dir) / "field.bin").string());
    res.field.write_sidecar((fs::path(dir) / "field.json").string());
    {
        std::string p = (fs::path(dir) / "ensembles.bin").string();
        std::ofstream os(p, std::ios::binary);
        if (!os) throw IoError("cannot write " + p);
        binio::put_u64(os, ens.size());
        for (std::size_t i = 0; i < ens.size(); ++i) write_ensemble(os, ens[i], &trajs[i]);
        if (!os) throw IoError("write failed: " + p);
    }
    json m;
    m["format"] = "rvm-manifest-1";
    m["tool_version"] = RVM_VERSION;
    m["scenario"] = cfg.scenario;
    m["config_hash"] = opt.config_hash;
    m["n"] = rec.n;
    m["Lambda"] = res.Lambda;
    m["linear_norm"] = res.linear_norm;
    m["alpha"] = res.alpha;
    m["smoothing_h"] = res.smoothing_h;
    m["converged"] = res.converged;
    m["files"] = {{"field", "field.bin"}, {"field_sidecar", "field.json"}, {"ensembles", "ensembles.bin"}};
    json hist = json::array();
    for (const auto& r : res.history) hist.push_back(record_json(r));
    m["history"] = hist;
    m["timestamp"] = utc_now();
    std::string mp = (fs::path(dir) / "manifest.json").string();
    std::ofstream os(mp);
    if (!os) throw IoError("cannot write " + mp);
    os << m.dump(2) << "\n";
}

// one iterate: push through K_prev, accumulate cone terms on the source lattice,
// deposit the kinetic-energy diagnostic, keep coarse-time trajectory samples
struct IterateWork {
    std::vector<ConeTerms> cone;
    ConeTally tally;
    std::vector<double> kinetic;  // coarse (t, x) nodes
    std::vector<std::vector<Trajectory>> samples;
};

IterateWork run_sources(const std::vector<ParticleEnsemble>& ens, const FieldOracle& push, const FieldOracle* K_prev,
                        const GridSpec& coarse, const ConeOptions& copt, double h, int workers) {
    ObserverSet obs;
    for (int ix = 0; ix < coarse.nx; ++ix)
        for (int iy = 0; iy < coarse.nx; ++iy)
            for (int iz = 0; iz < coarse.nx; ++iz) obs.xs.push_back(coarse.node(0, ix, iy, iz).x);
    for (int it = 0; it < coarse.nt; ++it) obs.ts.push_back(coarse.t0 + it * coarse.dt());
    const double t_end = coarse.t1;

    std::vector<std::pair<std::size_t, std::size_t>> refs;
    for (std::size_t e = 0; e < ens.size(); ++e)
        for (std::size_t i = 0; i < ens[e].particles.size(); ++i) refs.emplace_back(e, i);

    IterateWork out;
    out.samples.resize(ens.size());
    for (std::size_t e = 0; e < ens.size(); ++e) out.samples[e].resize(ens[e].particles.size());

    int nw = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(refs.size(), 1))));
    std::vector<std::vector<ConeTerms>> acc(nw, std::vector<ConeTerms>(obs.size()));
    std::vector<std::vector<double>> kin(nw, std::vector<double>(coarse.nodes(), 0.0));
    std::vector<ConeTally> tal(nw);
    const double dx = coarse.dx();
    parallel_chunks(refs.size(), nw, [&](int wk, std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            const Particle& p = ens[refs[q].first].particles[refs[q].second];
            Trajectory& smp = out.samples[refs[q].first][refs[q].second];
            smp.t_end = 0.0;
            smp.x_end = p.x;
            smp.v_end = p.v;
            if (p.w == 0.0) {
                smp.knots.push_back({0.0, p.x, p.v, hat_velocity(p.v), {}});
                continue;
            }
            Trajectory tr = integrate_characteristic(push, 0.0, {p.x, p.v}, t_end, copt.ode_tol);
            accumulate_trajectory(tr, p.w, obs, K_prev, copt, acc[wk].data(), tal[wk]);
            smp.exited = tr.exited;
            for (int it = 0; it < coarse.nt; ++it) {
                double t = obs.ts[it];
                if (!tr.covers(t)) break;
                PhaseState ps = tr.at(t);
                smp.knots.push_back({t, ps.x, ps.v, hat_velocity(ps.v), {}});
                double sp = p.w * norm(ps.v);
                if (sp == 0.0) continue;
                // Wendland deposit onto coarse nodes within h
                int lo[3], hi[3];
                for (int d = 0; d < 3; ++d) {
                    lo[d] = std::max(0, static_cast<int>(std::ceil((ps.x[d] - h + coarse.R) / dx)));
                    hi[d] = std::min(coarse.nx - 1, static_cast<int>(std::floor((ps.x[d] + h + coarse.R) / dx)));
                }
                for (int ix = lo[0]; ix <= hi[0]; ++ix)
                    for (int iy = lo[1]; iy <= hi[1]; ++iy)
                        for (int iz = lo[2]; iz <= hi[2]; ++iz) {
                            std::size_t node = coarse.index(it, ix, iy, iz);
                            double wv = wendland(norm(coarse.node(it, ix, iy, iz).x - ps.x), h);
                            kin[wk][node] += sp * wv;
                        }
            }
        }
    });
    for (int wk = 1; wk < nw; ++wk) {
        for (std::size_t j = 0; j < obs.size(); ++j) acc[0][j] += acc[wk][j];
        for (std::size_t j = 0; j < kin[0].size(); ++j) kin[0][j] += kin[wk][j];
        tal[0] += tal[wk];
    }
    out.cone = std::move(acc[0]);
    out.kinetic = std::move(kin[0]);
    out.tally = tal[0];
    return out;
}

}  // namespace

IterationResult run_iteration(const RunConfig& cfg, const InitialData& data, const IterationOptions& opt) {
    cfg.validate();
    IterationResult res;
    const GridSpec grid = grid_spec(cfg);
    const GridSpec coarse = grid.coarsened(cfg.source_stride);
    res.alpha = cfg.effective_alpha();

    if (data.has_density()) {
        res.decomposition = decompose(data, cfg.k_max, cfg.tail_tolerance);
        res.ensembles = initial_ensembles(cfg, res.decomposition);
    }
    std::vector<Particle> all;
    for (const auto& e : res.ensembles) all.insert(all.end(), e.particles.begin(), e.particles.end());
    res.smoothing_h = cfg.smoothing_h > 0.0 ? cfg.smoothing_h : (all.size() > 1 ? 2.0 * mean_spacing(all) : 1.0);
    {
        std::size_t n = 0;
        for (const auto& e : res.ensembles) n += e.particles.size();
        log(opt, "shells: " + std::to_string(res.ensembles.size()) + ", particles: " + std::to_string(n));
    }

    const auto probes = k0_probes(grid, cfg.probes_k0);
    const auto pairs = k1a_probe_pairs(grid, cfg.probes_k1a);
    const SphereConfig sph = sphere_config(cfg);

    // size of the linear field, measured directly at the probes
    {
        FunctionField lin([&](double t, const Vec3& x) { return kirchhoff_linear(data, t, x, sph); });
        std::vector<double> vals(probes.size());
        parallel_for(probes.size(), opt.workers, [&](std::size_t i) {
            vals[i] = decay_weight(probes[i].t, probes[i].x) * magnitude(lin.sample(probes[i].t, probes[i].x));
        });
        for (double v : vals) res.linear_norm = std::max(res.linear_norm, v);
    }
    res.Lambda = cfg.Lambda > 0.0 ? cfg.Lambda : 2.0 + 2.0 * res.linear_norm;
    if (res.Lambda < 2.0 + 2.0 * res.linear_norm)
        log(opt, "warning: Lambda below 2 + 2 ||(E_lin, B_lin)||");
    log(opt, "linear norm " + std::to_string(res.linear_norm) + ", Lambda " + std::to_string(res.Lambda));

    auto t0 = std::chrono::steady_clock::now();
    DataField dfield(data, sph, velocity_config(cfg));
    res.data_layer = build_field_cache([&](const SpacetimePoint& p) { return dfield(p.t, p.x); }, grid, opt.workers);
    log(opt, "data layer: " +
                 std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");

    FieldCache prev;
    bool have_prev = false;
    int n0 = 1;
    if (!opt.resume_manifest.empty()) {
        std::ifstream is(opt.resume_manifest);
        if (!is) throw IoError("cannot open " + opt.resume_manifest);
        json m;
        try {
            m = json::parse(is);
        } catch (const std::exception& e) {
            throw IoError("corrupt manifest " + opt.resume_manifest + ": " + e.what());
        }
        if (!opt.config_hash.empty() && m.value("config_hash", "") != opt.config_hash)
            throw ConfigError("manifest config hash does not match the configuration");
        for (const auto& r : m.at("history")) res.history.push_back(record_from(r));
        fs::path dir = fs::path(opt.resume_manifest).parent_path();
        prev = FieldCache::read((dir / m.at("files").at("field").get<std::string>()).string());
        have_prev = true;
        n0 = m.at("n").get<int>() + 1;
        if (m.value("converged", false)) {
            res.field = prev;
            res.converged = true;
            return res;
        }
    }

    const ConeOptions copt = cone_options(cfg);
    ZeroField zero;
    for (int n = n0; n <= cfg.max_iter; ++n) {
        auto ts = std::chrono::steady_clock::now();
        const FieldOracle& push = have_prev ? static_cast<const FieldOracle&>(prev) : zero;
        const FieldOracle* kp = have_prev ? &prev : nullptr;
        IterateWork w = run_sources(res.ensembles, push, kp, coarse, copt, res.smoothing_h, opt.workers);

        FieldCache src(coarse);
        const std::size_t nts = coarse.nt;
        for (int ix = 0; ix < coarse.nx; ++ix)
            for (int iy = 0; iy < coarse.nx; ++iy)
                for (int iz = 0; iz < coarse.nx; ++iz) {
                    std::size_t sp = (static_cast<std::size_t>(ix) * coarse.nx + iy) * coarse.nx + iz;
                    for (int it = 0; it < coarse.nt; ++it)
                        src.set_node(coarse.index(it, ix, iy, iz), w.cone[sp * nts + it].total());
                }
        FieldCache K = res.data_layer;
        K.add_prolonged(src, cfg.source_stride);
        for (double v : K.raw())
            if (!std::isfinite(v)) throw NumericalError("non-finite field value in iterate " + std::to_string(n));

        IterateRecord rec;
        rec.n = n;
        rec.norms = estimate_norm_K0(K, probes);
        estimate_norm_K1alpha(K, pairs, res.alpha, rec.norms);
        K.iterate = n;
        K.K0 = rec.norms.K0;
        K.K1a = rec.norms.K1a;
        rec.d_n = have_prev ? sup_difference(K, prev, probes) : sup_difference(K, zero, probes);
        rec.kinetic_max = w.kinetic.empty() ? 0.0 : *std::max_element(w.kinetic.begin(), w.kinetic.end());
        rec.member = membership_check(rec.norms, res.Lambda);
        rec.tally = w.tally;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
        if (!rec.member.pass)
            log(opt, "warning: iterate " + std::to_string(n) + " left K_Lambda (K0 " + std::to_string(rec.norms.K0) +
                         ", K1a " + std::to_string(rec.norms.K1a) + ")");
        res.history.push_back(rec);
        res.field = std::move(K);
        res.converged = rec.d_n < cfg.threshold;
        {
            std::ostringstream os;
            os << "iterate " << n << ": K0 " << rec.norms.K0 << ", K1a " << rec.norms.K1a << ", d_n " << rec.d_n
               << ", kinetic max " << rec.kinetic_max << ", " << rec.seconds << " s";
            log(opt, os.str());
        }
        if (!opt.checkpoint_dir.empty()) write_checkpoint(opt, cfg, res, res.ensembles, w.samples);
        prev = res.field;
        have_prev = true;
        if (res.converged) break;
    }
    return res;
}

}  // namespace rvm
