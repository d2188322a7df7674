#include "rvm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rvm/binary_io.hpp"

namespace rvm {

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "counts and seeds share one unsigned type");
using Member = std::variant<double RunConfig::*, int RunConfig::*, std::uint64_t RunConfig::*, std::string RunConfig::*>;

struct Key {
    const char* section;
    const char* name;
    Member m;
};

const std::vector<Key>& schema() {
    static const std::vector<Key> keys = {
        {"scenario", "name", &RunConfig::scenario},
        {"scenario", "q", &RunConfig::q},
        {"scenario", "eps0", &RunConfig::eps0},
        {"scenario", "M", &RunConfig::M},
        {"scenario", "seed", &RunConfig::seed},
        {"constants", "beta", &RunConfig::beta},
        {"constants", "alpha", &RunConfig::alpha},
        {"constants", "Lambda", &RunConfig::Lambda},
        {"particles", "per_shell", &RunConfig::particles_per_shell},
        {"particles", "k_max", &RunConfig::k_max},
        {"particles", "sampler", &RunConfig::sampler},
        {"particles", "tail_tolerance", &RunConfig::tail_tolerance},
        {"grid", "t_max", &RunConfig::t_max},
        {"grid", "nt", &RunConfig::nt},
        {"grid", "box_radius", &RunConfig::box_radius},
        {"grid", "nx", &RunConfig::nx},
        {"grid", "source_stride", &RunConfig::source_stride},
        {"numerics", "ode_tol", &RunConfig::ode_tol},
        {"numerics", "root_tol", &RunConfig::root_tol},
        {"numerics", "r_min", &RunConfig::r_min},
        {"numerics", "sphere_ntheta", &RunConfig::sphere_ntheta},
        {"numerics", "sphere_nphi", &RunConfig::sphere_nphi},
        {"numerics", "vel_nr", &RunConfig::vel_nr},
        {"numerics", "vel_ntheta", &RunConfig::vel_ntheta},
        {"numerics", "vel_nphi", &RunConfig::vel_nphi},
        {"numerics", "vel_radius", &RunConfig::vel_radius},
        {"numerics", "support_factor", &RunConfig::support_factor},
        {"iteration", "max_iter", &RunConfig::max_iter},
        {"iteration", "threshold", &RunConfig::threshold},
        {"iteration", "probes_k0", &RunConfig::probes_k0},
        {"iteration", "probes_k1a", &RunConfig::probes_k1a},
        {"diagnostics", "smoothing_h", &RunConfig::smoothing_h},
        {"diagnostics", "decay_samples", &RunConfig::decay_samples},
        {"diagnostics", "decay_t_min", &RunConfig::decay_t_min},
        {"diagnostics", "decay_vel_n", &RunConfig::decay_vel_n},
    };
    return keys;
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
    T v{};
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ConfigError("bad value for " + where + ": '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [sec, body] : pt) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key outside a section: " + sec);
        for (const auto& [key, node] : body) {
            const Key* k = nullptr;
            for (const auto& s : schema())
                if (sec == s.section && key == s.name) k = &s;
            if (!k) throw ConfigError("unknown key [" + sec + "] " + key);
            const std::string val = node.data();
            const std::string where = "[" + sec + "] " + key;
            std::visit(
                [&](auto mp) {
                    using T = std::remove_cvref_t<decltype(cfg.*mp)>;
                    if constexpr (std::is_same_v<T, std::string>)
                        cfg.*mp = val;
                    else
                        cfg.*mp = parse_number<T>(val, where);
                },
                k->m);
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    std::string sec;
    for (const auto& k : schema()) {
        if (sec != k.section) {
            if (!sec.empty()) os << "\n";
            sec = k.section;
            os << "[" << sec << "]\n";
        }
        os << k.name << " = ";
        std::visit(
            [&](auto mp) {
                using T = std::remove_cvref_t<decltype(cfg.*mp)>;
                if constexpr (std::is_same_v<T, double>)
                    os << format_double(cfg.*mp);
                else
                    os << cfg.*mp;
            },
            k.m);
        os << "\n";
    }
    return os.str();
}

std::string config_hash(const RunConfig& cfg) { return binio::hex64(binio::fnv1a(serialize_config(cfg))); }

}  // namespace rvm
