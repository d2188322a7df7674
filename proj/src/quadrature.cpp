#include "rvm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace rvm {

GaussLegendre gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
    GaussLegendre g;
    g.nodes.resize(n);
    g.weights.resize(n);
    const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (x * p0 - p1) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        g.nodes[i] = mid - half * x;
        g.nodes[n - 1 - i] = mid + half * x;
        g.weights[i] = g.weights[n - 1 - i] = half * w;
    }
    return g;
}

SphereRule sphere_rule(int ntheta, int nphi) {
    if (ntheta < 1 || nphi < 1) throw std::invalid_argument("sphere_rule: bad node counts");
    SphereRule s;
    s.ntheta = ntheta;
    s.nphi = nphi;
    auto gl = gauss_legendre(ntheta);
    const double dphi = 2.0 * std::numbers::pi / nphi;
    for (int i = 0; i < ntheta; ++i) {
        double c = gl.nodes[i];
        double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (int j = 0; j < nphi; ++j) {
            double phi = (j + 0.5) * dphi;
            s.dirs.push_back({sn * std::cos(phi), sn * std::sin(phi), c});
            s.weights.push_back(gl.weights[i] * dphi);
        }
    }
    return s;
}

BallRule ball_rule(double radius, int nr, int ntheta, int nphi) {
    BallRule b;
    b.radius = radius;
    auto gr = gauss_legendre(nr, 0.0, radius);
    auto sr = sphere_rule(ntheta, nphi);
    for (int i = 0; i < nr; ++i) {
        double r = gr.nodes[i];
        for (std::size_t j = 0; j < sr.dirs.size(); ++j) {
            b.points.push_back(r * sr.dirs[j]);
            b.weights.push_back(gr.weights[i] * r * r * sr.weights[j]);
        }
    }
    return b;
}

int nth_prime(int n) {
    int count = 0;
    for (int p = 2;; ++p) {
        bool prime = true;
        for (int d = 2; d * d <= p; ++d)
            if (p % d == 0) { prime = false; break; }
        if (prime && count++ == n) return p;
    }
}

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

ScrambledHalton::ScrambledHalton(int dims, std::uint64_t seed) : dims_(dims) {
    std::mt19937_64 rng(seed);
    for (int d = 0; d < dims; ++d) {
        int b = nth_prime(d);
        bases_.push_back(b);
        std::vector<std::uint16_t> p(static_cast<std::size_t>(kLevels) * b);
        for (int lv = 0; lv < kLevels; ++lv) {
            std::uint16_t* row = p.data() + lv * b;
            for (int k = 0; k < b; ++k) row[k] = static_cast<std::uint16_t>(k);
            for (int k = b - 1; k > 0; --k) {
                int j = static_cast<int>(rng() % static_cast<std::uint64_t>(k + 1));
                std::swap(row[k], row[j]);
            }
        }
        perms_.push_back(std::move(p));
    }
}

void ScrambledHalton::point(std::uint64_t i, double* out) const {
    for (int d = 0; d < dims_; ++d) {
        const int b = bases_[d];
        const double inv = 1.0 / b;
        double f = inv, r = 0.0;
        std::uint64_t n = i;
        // permuting trailing zero digits too keeps the scrambled point off the lattice
        for (int lv = 0; lv < kLevels && f > 1e-18; ++lv) {
            int digit = static_cast<int>(n % b);
            n /= b;
            r += f * perms_[d][lv * b + digit];
            f *= inv;
        }
        out[d] = std::min(r, 1.0 - 1e-16);
    }
}

double normal_quantile(double u) {
    static const boost::math::normal_distribution<double> nd(0.0, 1.0);
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    return boost::math::quantile(nd, u);
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return (splitmix64(state) >> 11) * 0x1.0p-53; }

}  // namespace rvm
