#pragma once

#include <cstdint>
#include <vector>

#include "rvm/core_types.hpp"

namespace rvm {

struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point rule on [a, b].
GaussLegendre gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Product rule on the unit sphere: Gauss-Legendre in cos(theta), uniform in phi.
// Weights sum to 4 pi.
struct SphereRule {
    std::vector<Vec3> dirs;
    std::vector<double> weights;
    int ntheta = 0, nphi = 0;
};
SphereRule sphere_rule(int ntheta, int nphi);

// Spherical product rule on the ball |v| <= R; weights carry the r^2 measure.
struct BallRule {
    std::vector<Vec3> points;
    std::vector<double> weights;
    double radius = 0.0;
};
BallRule ball_rule(double radius, int nr, int ntheta, int nphi);

// Halton sequence with per-digit random permutations (seeded).
class ScrambledHalton {
public:
    ScrambledHalton(int dims, std::uint64_t seed);
    int dims() const { return dims_; }
    // point i in [0,1)^dims
    void point(std::uint64_t i, double* out) const;

private:
    int dims_;
    std::vector<int> bases_;
    // perms_[d][level * base + digit]
    std::vector<std::vector<std::uint16_t>> perms_;
    static constexpr int kLevels = 64;
};

// Unscrambled prefix-stable Halton, used for probe sets.
double radical_inverse(std::uint64_t i, int base);
int nth_prime(int n);

double normal_quantile(double u);

// splitmix64 step; deterministic across platforms
std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

}  // namespace rvm
