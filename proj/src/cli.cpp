#include "rvm/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rvm/binary_io.hpp"
#include "rvm/config.hpp"
#include "rvm/iteration.hpp"
#include "rvm/parallel.hpp"

namespace rvm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << text;
    if (!os) throw IoError("write failed: " + p.string());
}

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw IoError("cannot open " + p.string());
    try {
        return json::parse(is);
    } catch (const std::exception& e) {
        throw IoError("corrupt " + p.string() + ": " + e.what());
    }
}

// maps the library error classes onto exit codes
template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

std::vector<double> decay_times(const RunConfig& cfg) {
    std::vector<double> ts;
    const int n = std::max(2, cfg.decay_samples);
    const double a = std::min(cfg.decay_t_min, cfg.t_max), b = cfg.t_max;
    for (int i = 0; i < n; ++i) ts.push_back(a + (b - a) * i / (n - 1));
    return ts;
}

// per fine time slice: sup of the weighted field and of the field
void field_decay(const FieldCache& K, std::vector<std::pair<double, double>>& weighted,
                 std::vector<std::pair<double, double>>& plain) {
    const GridSpec& g = K.grid();
    for (int it = 0; it < g.nt; ++it) {
        double sw = 0.0, sp = 0.0;
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iy = 0; iy < g.nx; ++iy)
                for (int iz = 0; iz < g.nx; ++iz) {
                    std::size_t idx = g.index(it, ix, iy, iz);
                    SpacetimePoint p = g.node(idx);
                    double m = magnitude(K.node_value(idx));
                    sp = std::max(sp, m);
                    sw = std::max(sw, decay_weight(p.t, p.x) * m);
                }
        double t = g.t0 + it * g.dt();
        weighted.push_back({t, sw});
        plain.push_back({t, sp});
    }
}

}  // namespace

std::string summary_csv(const std::vector<IterateRecord>& history) {
    std::ostringstream os;
    os << "n,K0,K1a,d_n,kinetic_max\n";
    for (const auto& r : history)
        os << r.n << "," << num(r.norms.K0) << "," << num(r.norms.K1a) << "," << num(r.d_n) << ","
           << num(r.kinetic_max) << "\n";
    return os.str();
}

std::string series_csv(const std::string& header, const std::vector<std::pair<double, double>>& rows) {
    std::ostringstream os;
    os << header << "\n";
    for (const auto& [a, b] : rows) os << num(a) << "," << num(b) << "\n";
    return os.str();
}

std::string latest_manifest(const std::string& run_dir) {
    if (!fs::is_directory(run_dir)) throw IoError("not a run directory: " + run_dir);
    const std::regex re("iter_([0-9]+)");
    int best = -1;
    fs::path found;
    for (const auto& e : fs::directory_iterator(run_dir)) {
        std::smatch m;
        std::string name = e.path().filename().string();
        if (!e.is_directory() || !std::regex_match(name, m, re)) continue;
        fs::path mf = e.path() / "manifest.json";
        if (!fs::exists(mf)) continue;
        int n = std::stoi(m[1]);
        if (n > best) {
            best = n;
            found = mf;
        }
    }
    if (best < 0) throw IoError("no iterate manifest in " + run_dir);
    return found.string();
}

RunArtifacts load_run(const std::string& run_dir) {
    RunArtifacts run;
    const fs::path cfg_path = fs::path(run_dir) / "config.ini";
    if (!fs::exists(cfg_path)) throw IoError("missing " + cfg_path.string());
    try {
        run.cfg = load_config(cfg_path.string());
    } catch (const ConfigError& e) {
        throw IoError("corrupt " + cfg_path.string() + ": " + e.what());
    }
    run.config_hash = config_hash(run.cfg);
    const fs::path mpath = latest_manifest(run_dir);
    json m = read_json(mpath);
    try {
        if (m.at("config_hash").get<std::string>() != run.config_hash)
            throw IoError("config hash mismatch between " + cfg_path.string() + " and " + mpath.string());
        run.n = m.at("n").get<int>();
        run.Lambda = m.at("Lambda").get<double>();
        const fs::path dir = mpath.parent_path();
        for (const auto& [key, f] : m.at("files").items())
            if (!fs::exists(dir / f.get<std::string>())) throw IoError("missing " + (dir / f.get<std::string>()).string());
        run.field = FieldCache::read((dir / m.at("files").at("field").get<std::string>()).string());
        const fs::path ep = dir / m.at("files").at("ensembles").get<std::string>();
        std::ifstream is(ep, std::ios::binary);
        if (!is) throw IoError("cannot open " + ep.string());
        try {
            std::uint64_t count = binio::get_u64(is);
            if (count > 4096) throw IoError("bad shell count");
            for (std::uint64_t i = 0; i < count; ++i) run.ensembles.push_back(read_ensemble(is));
        } catch (const std::exception& e) {
            throw IoError("corrupt " + ep.string() + ": " + e.what());
        }
        if (run.n > 1) {
            const fs::path prev = fs::path(iterate_dir(run_dir, run.n - 1)) / "field.bin";
            run.push_field = FieldCache::read(prev.string());
            run.has_push = true;
            const auto& h = m.at("history");
            for (const auto& r : h)
                if (r.at("n").get<int>() == run.n - 1) {
                    run.push_K0 = r.at("norms").at("K0").get<double>();
                    run.push_K1a = r.at("norms").at("K1a").get<double>();
                }
        }
    } catch (const json::exception& e) {
        throw IoError("corrupt " + mpath.string() + ": " + e.what());
    }
    return run;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const RunFlags& flags) {
    return guarded([&] {
        RunConfig cfg = load_config(config_path);
        cfg.validate();
        const std::string hash = config_hash(cfg);
        const fs::path out(out_dir);
        fs::create_directories(out);
        IterationOptions opt;
        opt.workers = worker_count();
        opt.checkpoint_dir = out.string();
        opt.config_hash = hash;
        if (!flags.quiet) opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
        if (flags.resume) {
            opt.resume_manifest = latest_manifest(out.string());
        } else if (fs::exists(out / "config.ini")) {
            throw IoError("run directory already holds a run: " + out.string());
        }
        write_text(out / "config.ini", serialize_config(cfg));

        const InitialData data = make_scenario(cfg);
        IterationResult res = run_iteration(cfg, data, opt);

        write_text(out / "summary.csv", summary_csv(res.history));
        std::vector<std::pair<double, double>> rho;
        if (data.has_density())
            rho = density_series(res.field, data, decay_times(cfg), {}, cfg.decay_vel_n, cfg.ode_tol, opt.workers);
        write_text(out / "density_decay.csv", series_csv("t,density_x0", rho));
        std::vector<std::pair<double, double>> fw, fp;
        field_decay(res.field, fw, fp);
        write_text(out / "field_decay.csv", series_csv("t,sup_weighted_field", fw));
        write_text(out / "field_sup.csv", series_csv("t,sup_field", fp));

        json fit = {{"window", {cfg.decay_t_min, cfg.t_max}}};
        try {
            DecayFit f = decay_fit(rho, cfg.decay_t_min, cfg.t_max);
            fit["slope"] = f.slope;
            fit["width"] = f.width;
            fit["points"] = f.points;
        } catch (const NumericalError& e) {
            fit["slope"] = nullptr;
            fit["note"] = e.what();
        }
        write_text(out / "decay_fit.json", fit.dump(2) + "\n");
        if (!flags.quiet)
            std::cerr << "done: " << res.history.size() << " iterates, converged " << (res.converged ? "yes" : "no")
                      << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_verify(const std::string& run_dir, const std::string& checks_filter, const SuiteOptions& base) {
    return guarded([&] {
        RunArtifacts run = load_run(run_dir);
        SuiteOptions opt = base;
        opt.filter = checks_filter;
        opt.workers = worker_count();
        auto checks = lemma_suite(run, opt);
        json rep = report_json(checks, run.config_hash);
        write_text(fs::path(run_dir) / "verify_report.json", rep.dump(2) + "\n");
        for (const auto& c : checks) std::cout << c.check_id << ": " << c.status << "\n";
        return rep.at("hard_checks_pass").get<bool>() ? static_cast<int>(kOk) : static_cast<int>(kHardCheck);
    });
}

int cmd_linear(const std::string& config_path, const std::string& out_dir) {
    return guarded([&] {
        RunConfig cfg = load_config(config_path);
        cfg.validate();
        const InitialData data = make_scenario(cfg);
        const fs::path out(out_dir);
        fs::create_directories(out);
        const GridSpec g = grid_spec(cfg);
        const SphereConfig sph = sphere_config(cfg);
        const int workers = worker_count();
        FieldCache K = build_field_cache(
            [&](const SpacetimePoint& p) { return kirchhoff_linear(data, p.t, p.x, sph); }, g, workers);
        const auto probes = k0_probes(g, cfg.probes_k0);
        NormReport rep = estimate_norm_K0(K, probes);
        estimate_norm_K1alpha(K, k1a_probe_pairs(g, cfg.probes_k1a), cfg.effective_alpha(), rep);
        K.K0 = rep.K0;
        K.K1a = rep.K1a;
        K.write((out / "linear_field.bin").string());
        K.write_sidecar((out / "linear_field.json").string());
        json j = {{"config_hash", config_hash(cfg)},
                  {"M", data.M},
                  {"K0", rep.K0},
                  {"K1a", rep.K1a},
                  {"K0_over_M", data.M > 0.0 ? rep.K0 / data.M : 0.0},
                  {"k0_witness", {rep.k0_witness.t, rep.k0_witness.x.x, rep.k0_witness.x.y, rep.k0_witness.x.z}},
                  {"grid", {{"t_max", g.t1}, {"nt", g.nt}, {"box_radius", g.R}, {"nx", g.nx}}}};
        write_text(out / "linear.json", j.dump(2) + "\n");
        std::cout << "K0 " << num(rep.K0) << "  K1a " << num(rep.K1a) << "  K0/M " << num(j["K0_over_M"].get<double>())
                  << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_report(const std::string& run_dir, std::ostream& os) {
    return guarded([&] {
        fs::path mp = fs::is_directory(run_dir) ? fs::path(latest_manifest(run_dir)) : fs::path(run_dir);
        json m = read_json(mp);
        try {
            os << "manifest    " << mp.string() << "\n";
            os << "scenario    " << m.at("scenario").get<std::string>() << "\n";
            os << "tool        " << m.at("tool_version").get<std::string>() << "\n";
            os << "config hash " << m.at("config_hash").get<std::string>() << "\n";
            os << "written     " << m.at("timestamp").get<std::string>() << "\n";
            os << "iterate     " << m.at("n").get<int>() << (m.at("converged").get<bool>() ? " (converged)" : "")
               << "\n";
            os << "Lambda      " << num(m.at("Lambda").get<double>()) << "\n";
            os << "\n" << std::setw(4) << "n" << std::setw(14) << "K0" << std::setw(14) << "K1a" << std::setw(14)
               << "d_n" << std::setw(14) << "kinetic" << std::setw(8) << "member" << std::setw(10) << "seconds\n";
            for (const auto& r : m.at("history")) {
                os << std::setw(4) << r.at("n").get<int>() << std::scientific << std::setprecision(5)
                   << std::setw(14) << r.at("norms").at("K0").get<double>() << std::setw(14)
                   << r.at("norms").at("K1a").get<double>() << std::setw(14) << r.at("d_n").get<double>()
                   << std::setw(14) << r.at("kinetic_max").get<double>() << std::setw(8)
                   << (r.at("membership").at("pass").get<bool>() ? "yes" : "no") << std::fixed
                   << std::setprecision(1) << std::setw(9) << r.at("seconds").get<double>() << "\n";
            }
            os << std::defaultfloat;
        } catch (const json::exception& e) {
            throw IoError("corrupt " + mp.string() + ": " + e.what());
        }
        return static_cast<int>(kOk);
    });
}

int main(int argc, char** argv) {
    CLI::App app{"Relativistic Vlasov-Maxwell iteration and verification harness", "rvm"};
    app.set_version_flag("--version", std::string(RVM_VERSION));
    app.require_subcommand(1);

    std::string config, out, run_dir, checks;
    RunFlags flags;
    SuiteOptions sopt;

    auto* run = app.add_subcommand("run", "run the field iteration and write checkpoints and CSV summaries");
    run->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("out_dir", out, "output directory")->required();
    run->add_flag("--resume", flags.resume, "continue after the latest checkpoint in out_dir");
    run->add_flag("-q,--quiet", flags.quiet, "no progress log");

    auto* ver = app.add_subcommand("verify", "run the check suite on a completed run");
    ver->add_option("run_dir", run_dir, "run directory")->required();
    ver->add_option("--checks", checks, "comma separated check ids (default: all)");
    ver->add_option("--kernel-samples", sopt.kernel_samples, "samples for the kernel bound check");
    ver->add_option("--probes", sopt.probes, "observer probes per check");

    auto* lin = app.add_subcommand("linear", "evaluate only the linear field on the grid");
    lin->add_option("config", config, "configuration file")->required()->check(CLI::ExistingFile);
    lin->add_option("out_dir", out, "output directory")->required();

    auto* rep = app.add_subcommand("report", "print a run manifest");
    rep->add_option("run_dir", run_dir, "run directory or manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }
    if (*run) return cmd_run(config, out, flags);
    if (*ver) return cmd_verify(run_dir, checks, sopt);
    if (*lin) return cmd_linear(config, out);
    if (*rep) return cmd_report(run_dir, std::cout);
    return kConfig;
}

}  // namespace rvm::cli
