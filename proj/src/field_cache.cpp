#include "rvm/field_cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "rvm/binary_io.hpp"

namespace rvm {

namespace {
constexpr char kMagic[8] = {'R', 'V', 'M', 'F', 'C', '0', '0', '1'};

inline void cell(double u, int n, int& i, double& f) {
    if (u <= 0.0) {
        i = 0;
        f = 0.0;
        return;
    }
    if (u >= n - 1) {
        i = n - 2;
        f = 1.0;
        return;
    }
    i = std::min(static_cast<int>(u), n - 2);
    f = u - i;
}
}  // namespace

SpacetimePoint GridSpec::node(int it, int ix, int iy, int iz) const {
    double h = dx();
    return {t0 + it * dt(), {-R + ix * h, -R + iy * h, -R + iz * h}};
}

SpacetimePoint GridSpec::node(std::size_t idx) const {
    int iz = static_cast<int>(idx % nx);
    idx /= nx;
    int iy = static_cast<int>(idx % nx);
    idx /= nx;
    int ix = static_cast<int>(idx % nx);
    int it = static_cast<int>(idx / nx);
    return node(it, ix, iy, iz);
}

bool GridSpec::contains(double t, const Vec3& x) const {
    const double eps = 1e-12 * std::max(1.0, R);
    return t >= t0 - 1e-12 && t <= t1 + 1e-12 && std::abs(x.x) <= R + eps && std::abs(x.y) <= R + eps &&
           std::abs(x.z) <= R + eps;
}

GridSpec GridSpec::coarsened(int stride) const {
    GridSpec c = *this;
    c.nt = (nt - 1) / stride + 1;
    c.nx = (nx - 1) / stride + 1;
    return c;
}

FieldCache::FieldCache(const GridSpec& g) : g_(g), data_(g.nodes() * 6, 0.0) {
    if (g.nt < 2 || g.nx < 2) throw ConfigError("field cache grid needs at least 2 nodes per axis");
}

FieldSample FieldCache::node_value(std::size_t idx) const {
    const double* p = data_.data() + 6 * idx;
    return {{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
}

void FieldCache::set_node(std::size_t idx, const FieldSample& k) {
    double* p = data_.data() + 6 * idx;
    p[0] = k.E.x;
    p[1] = k.E.y;
    p[2] = k.E.z;
    p[3] = k.B.x;
    p[4] = k.B.y;
    p[5] = k.B.z;
}

FieldSample FieldCache::sample(double t, const Vec3& x) const {
    const double h = g_.dx();
    // small overshoot of interpolated paths is clamped onto the boundary cell
    const double sx = g_.R + 1e-3 * h, st = 1e-3 * g_.dt();
    if (!(t >= g_.t0 - st && t <= g_.t1 + st && std::abs(x.x) <= sx && std::abs(x.y) <= sx && std::abs(x.z) <= sx))
        throw DomainError("field requested outside the cache domain");
    int it, ix, iy, iz;
    double ft, fx, fy, fz;
    cell((t - g_.t0) / g_.dt(), g_.nt, it, ft);
    cell((x.x + g_.R) / h, g_.nx, ix, fx);
    cell((x.y + g_.R) / h, g_.nx, iy, fy);
    cell((x.z + g_.R) / h, g_.nx, iz, fz);
    double acc[6] = {0, 0, 0, 0, 0, 0};
    for (int a = 0; a < 2; ++a) {
        double wa = a ? ft : 1.0 - ft;
        if (wa == 0.0) continue;
        for (int b = 0; b < 2; ++b) {
            double wb = wa * (b ? fx : 1.0 - fx);
            if (wb == 0.0) continue;
            for (int c = 0; c < 2; ++c) {
                double wc = wb * (c ? fy : 1.0 - fy);
                if (wc == 0.0) continue;
                for (int d = 0; d < 2; ++d) {
                    double w = wc * (d ? fz : 1.0 - fz);
                    if (w == 0.0) continue;
                    const double* p = data_.data() + 6 * g_.index(it + a, ix + b, iy + c, iz + d);
                    for (int m = 0; m < 6; ++m) acc[m] += w * p[m];
                }
            }
        }
    }
    return {{acc[0], acc[1], acc[2]}, {acc[3], acc[4], acc[5]}};
}

void FieldCache::add_prolonged(const FieldCache& coarse, int stride) {
    const GridSpec& cg = coarse.grid();
    if (cg.nt != (g_.nt - 1) / stride + 1 || cg.nx != (g_.nx - 1) / stride + 1)
        throw ConfigError("coarse grid does not match the stride");
    for (std::size_t i = 0; i < g_.nodes(); ++i) {
        SpacetimePoint p = g_.node(i);
        FieldSample k = coarse.sample(p.t, p.x);
        double* q = data_.data() + 6 * i;
        q[0] += k.E.x;
        q[1] += k.E.y;
        q[2] += k.E.z;
        q[3] += k.B.x;
        q[4] += k.B.y;
        q[5] += k.B.z;
    }
}

void FieldCache::add(const FieldCache& other) {
    if (other.data_.size() != data_.size()) throw ConfigError("field cache size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void FieldCache::write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write(kMagic, 8);
    binio::put_f64(os, g_.t0);
    binio::put_f64(os, g_.t1);
    binio::put_u64(os, static_cast<std::uint64_t>(g_.nt));
    binio::put_f64(os, g_.R);
    binio::put_u64(os, static_cast<std::uint64_t>(g_.nx));
    binio::put_u64(os, static_cast<std::uint64_t>(iterate));
    binio::put_f64(os, K0);
    binio::put_f64(os, K1a);
    for (double v : data_) binio::put_f64(os, v);
    if (!os) throw IoError("write failed: " + path);
}

FieldCache FieldCache::read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a field cache file: " + path);
    try {
        GridSpec g;
        g.t0 = binio::get_f64(is);
        g.t1 = binio::get_f64(is);
        g.nt = static_cast<int>(binio::get_u64(is));
        g.R = binio::get_f64(is);
        g.nx = static_cast<int>(binio::get_u64(is));
        if (g.nt < 2 || g.nx < 2 || g.nt > 100000 || g.nx > 100000 || !(g.t1 > g.t0) || !(g.R > 0))
            throw IoError("corrupt field cache header: " + path);
        FieldCache c(g);
        c.iterate = static_cast<int>(binio::get_u64(is));
        c.K0 = binio::get_f64(is);
        c.K1a = binio::get_f64(is);
        for (auto& v : c.data_) v = binio::get_f64(is);
        if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in field cache: " + path);
        return c;
    } catch (const IoError& e) {
        throw IoError(std::string(e.what()) + " (" + path + ")");
    }
}

void FieldCache::write_sidecar(const std::string& json_path) const {
    nlohmann::ordered_json j;
    j["format"] = "rvm-field-cache-1";
    j["layout"] = "row-major (t, x, y, z); 6 f64 per node (Ex Ey Ez Bx By Bz); little-endian";
    j["t0"] = g_.t0;
    j["t1"] = g_.t1;
    j["nt"] = g_.nt;
    j["box_radius"] = g_.R;
    j["nx"] = g_.nx;
    j["iterate"] = iterate;
    j["K0"] = K0;
    j["K1a"] = K1a;
    std::ofstream os(json_path);
    if (!os) throw IoError("cannot write " + json_path);
    os << j.dump(2) << "\n";
}

}  // namespace rvm
