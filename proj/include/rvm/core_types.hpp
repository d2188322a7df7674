#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace rvm {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double a, double b, double c) : x(a), y(b), z(c) {}

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
constexpr bool operator==(const Vec3& a, const Vec3& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline bool finite(const Vec3& a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

// Row i holds the gradient of component i: m[i][j] = d_j F_i.
using Mat3 = std::array<std::array<double, 3>, 3>;
// t[k] is d_k of the Jacobian.
using Tensor3 = std::array<Mat3, 3>;

struct PhaseState {
    Vec3 x;
    Vec3 v;
};

struct SpacetimePoint {
    double t = 0.0;
    Vec3 x;
};

struct FieldSample {
    Vec3 E;
    Vec3 B;

    FieldSample& operator+=(const FieldSample& o) { E += o.E; B += o.B; return *this; }
};

inline FieldSample operator+(FieldSample a, const FieldSample& b) { return a += b; }
inline FieldSample operator-(const FieldSample& a, const FieldSample& b) { return {a.E - b.E, a.B - b.B}; }
inline FieldSample operator*(double s, const FieldSample& a) { return {s * a.E, s * a.B}; }
inline double magnitude(const FieldSample& k) { return norm(k.E) + norm(k.B); }

// v / sqrt(1 + |v|^2)
Vec3 hat_velocity(const Vec3& v);
inline double lorentz_factor(const Vec3& v) { return std::sqrt(1.0 + norm2(v)); }

struct InitialData {
    std::string name;
    std::function<double(const Vec3&, const Vec3&)> f0;
    std::function<Vec3(const Vec3&)> E0, B0;
    std::function<Mat3(const Vec3&)> dE0, dB0;
    std::function<Tensor3(const Vec3&)> d2E0, d2B0;
    // f0 = space(x) * velocity(v) when set; lets sphere/velocity integrals factor.
    std::function<double(const Vec3&)> f0_space, f0_velocity;
    // f0_velocity depends on |v| only
    bool velocity_isotropic = false;
    // rho0 = int f0 dv, when known in closed form
    std::function<double(const Vec3&)> rho0;
    double M = 2.0;
    double q = 10.0;
    double eps0 = 0.0;
    // constant in 0 <= f0 <= eps_hyp (1+|x|+|v|)^-q
    double eps_hyp = 0.0;
    // |(x,v)| beyond which f0 is below double precision relative to its peak
    double phase_radius = 8.0;
    std::uint64_t seed = 0;

    bool has_density() const { return eps0 > 0.0; }
    bool separable() const { return static_cast<bool>(f0_space) && static_cast<bool>(f0_velocity); }
};

// Gaussian density, rotational Gaussian external fields, closed-form Coulomb part.
InitialData make_gaussian_scenario(double eps0, double M, double q, std::uint64_t seed);
// Same fields, no particles.
InitialData make_vacuum_scenario(double M, std::uint64_t seed);

// Coulomb part of E0 for rho0 = A exp(-|x|^2): E = 4 pi A G(|x|^2) x.
struct GaussianCoulomb {
    double A = 0.0;
    static double G(double u);
    static double dG(double u);
    static double d2G(double u);
    Vec3 field(const Vec3& x) const;
    Mat3 jacobian(const Vec3& x) const;
    Tensor3 hessian(const Vec3& x) const;
    // enclosed charge 4 pi int_0^r rho0 s^2 ds
    double enclosed_charge(double r) const;
};

// F = a exp(-|x|^2) (m x x); divergence free.
struct RotationalGaussian {
    double a = 0.0;
    Vec3 m{0, 0, 1};
    Vec3 field(const Vec3& x) const;
    Mat3 jacobian(const Vec3& x) const;
    Tensor3 hessian(const Vec3& x) const;
};

struct DecayCheck {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_field_ratio = 0.0;   // max |D^k F| (1+|x|)^(2+k) / M
    double worst_density_ratio = 0.0; // max f0 (1+|x|+|v|)^q / eps_hyp
    double max_div_B = 0.0;
    double max_gauss_residual = 0.0;
};

// Samples the hypothesis inequalities at low-discrepancy points.
DecayCheck check_initial_data(const InitialData& data, std::size_t samples, double radius, double fd_h);

struct RunConfig {
    // scenario
    std::string scenario = "gaussian";
    double q = 10.0;
    double eps0 = 1e-3;
    double M = 1.5;
    std::uint64_t seed = 1;
    // constants
    double beta = 0.5;
    double alpha = 0.0;   // 0 selects 0.9 * min(beta/6, (q-9) beta/2)
    double Lambda = 0.0;  // 0 selects 2 + 2 ||(E_lin, B_lin)||
    // particles
    std::size_t particles_per_shell = 4000;
    int k_max = 8;
    std::string sampler = "radial";
    double tail_tolerance = 1e-10;
    // grid
    double t_max = 10.0;
    int nt = 21;
    double box_radius = 6.0;
    int nx = 25;
    int source_stride = 1;
    // numerics
    double ode_tol = 1e-8;
    double root_tol = 1e-12;
    double r_min = 1e-6;
    int sphere_ntheta = 24;
    int sphere_nphi = 48;
    int vel_nr = 12;
    int vel_ntheta = 8;
    int vel_nphi = 16;
    double vel_radius = 6.0;
    double support_factor = 4.0;
    // iteration
    int max_iter = 4;
    double threshold = 1e-12;
    std::size_t probes_k0 = 4096;
    std::size_t probes_k1a = 4096;
    // diagnostics
    double smoothing_h = 0.0;  // 0 selects twice the mean particle spacing
    int decay_samples = 12;
    double decay_t_min = 5.0;
    int decay_vel_n = 16;

    double effective_alpha() const;
    void validate() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

InitialData make_scenario(const RunConfig& cfg);

}  // namespace rvm
