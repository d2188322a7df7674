#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rvm/core_types.hpp"
#include "rvm/density.hpp"
#include "rvm/field_cache.hpp"
#include "rvm/fields.hpp"

namespace rvm {

struct OracleConfig {
    // cone quadrature: GL in r on [r_min, t], sphere in omega, ball in v
    int cone_nr = 16;
    SphereConfig cone_sphere{12, 24, false};
    VelocityConfig cone_vel{5.0, 12, 8, 16};
    double r_min = 0.0;
    // momentum rhs: GL along rays from the observer, sphere, ball in v
    int ball_ns = 24;
    SphereConfig ball_sphere{16, 32, false};
    VelocityConfig ball_vel{8.0, 20, 10, 20};
    // finite differences; on a FieldCache the spacing must be at least twice the cache spacing
    double fd_h = 0.1;
    double fd_dt = 0.1;
    std::size_t mc_samples = 1000000;
    double rel_tol = 0.02;
    std::uint64_t seed = 1;

    void validate() const;
};

using DensityFn = std::function<double(double, const Vec3&, const Vec3&)>;

// Direct (r, omega, v) tensor quadrature of the four cone integrals at one
// observer. K_prev supplies the force in the S terms (none: S terms vanish).
ConeTerms cone_quadrature_oracle(const DensityFn& density, const FieldOracle* K_prev, const SpacetimePoint& obs,
                                 const OracleConfig& cfg, int workers = 1);

// rho and j = int vhat f dv at (t, x) from a velocity ball rule
ChargeCurrent velocity_moments(const DensityFn& density, double t, const Vec3& x, const VelocityConfig& vel);

// Closed-form density of free-streaming or gyrating (uniform B along z, no E) data.
DensityFn gyration_density(std::function<double(const Vec3&, const Vec3&)> f_init, double Bz);

struct MomentumCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_err = 0.0;
    std::size_t crossings = 0;
};

// lhs: sum of weights of particles crossing the backward cone of obs;
// rhs: quadrature of the shell datum over |y - x| <= t.
MomentumCheck momentum_conservation_check(const PushedEnsemble& ens, const DyadicComponent& comp,
                                          const SpacetimePoint& obs, const OracleConfig& cfg, int workers = 1);
double shell_mass_in_ball(const DyadicComponent& comp, const Vec3& x, double t, const OracleConfig& cfg,
                          int workers = 1);

struct Stencil {
    double h = 0.1;   // space
    double dt = 0.1;  // time
};

// residual order: dtE - curl B + 4 pi j, div E - 4 pi rho, dtB + curl E, div B
struct ResidualNorms {
    std::array<double, 4> max{};
    std::array<double, 4> mean{};
    std::size_t probes = 0;
};
using SourceFn = std::function<ChargeCurrent(double, const Vec3&)>;

// 4th-order centred space differences, 2nd-order centred time differences.
ResidualNorms maxwell_residual(const FieldOracle& field, const SourceFn& sources,
                               std::span<const SpacetimePoint> probes, const Stencil& st, int workers = 1);

struct MeasureEstimate {
    double mu = 0.0;
    double stderr_mu = 0.0;
    double ratio = 0.0;  // mu / (P^5 delta^3)
};

// Monte Carlo measure of {w : |w| <= P, |vhat - what| <= delta}
MeasureEstimate schaeffer_measure_check(double P, double delta, std::size_t samples, const Vec3& v_center,
                                        std::uint64_t seed);
// midpoint grid count of the same set with n^3 cells over a bounding box
double schaeffer_measure_grid(double P, double delta, const Vec3& v_center, int n);

struct DecayFit {
    double slope = 0.0;
    double width = 0.0;  // half-width of the 95% confidence interval
    double intercept = 0.0;
    std::size_t points = 0;
};

// least squares of log(value) against log(1 + t) for t in [t_lo, t_hi]
DecayFit decay_fit(const std::vector<std::pair<double, double>>& series, double t_lo, double t_hi);

// int f dv at (t, x) by backward characteristics on a ball of radius
// min(a, 1.5 a / sqrt(1 + t^2)), a = data.phase_radius
double density_at(const FieldOracle& field, const InitialData& data, double t, const Vec3& x, int vel_n,
                  double tol);
std::vector<std::pair<double, double>> density_series(const FieldOracle& field, const InitialData& data,
                                                      const std::vector<double>& ts, const Vec3& x, int vel_n,
                                                      double tol, int workers);

struct KernelBoundReport {
    std::size_t samples = 0;
    std::array<std::size_t, 4> violations{};  // kT, kz, grad_v d, |omega + vhat|^2
    std::array<double, 4> worst_ratio{};
};
KernelBoundReport kernel_bound_check(std::size_t samples, double v_max, std::uint64_t seed);

using Json = nlohmann::ordered_json;

struct CheckResult {
    std::string check_id;
    std::string paper_ref;
    std::string status;  // pass, fail, measured
    Json values = Json::object();
    Json witnesses = Json::object();
    bool hard() const { return status == "pass" || status == "fail"; }
};

// What a completed run leaves on disk, loaded.
struct RunArtifacts {
    RunConfig cfg;
    std::string config_hash;
    int n = 0;
    FieldCache field;       // last iterate
    FieldCache push_field;  // the field its particles moved in
    bool has_push = false;  // false: they moved in K = 0
    double push_K0 = 0.0, push_K1a = 0.0;
    std::vector<ParticleEnsemble> ensembles;
    double Lambda = 0.0;
};

struct SuiteOptions {
    std::string filter;  // comma separated check ids; empty runs all
    std::size_t kernel_samples = 1000000;
    std::size_t sphere_samples = 1000;
    std::size_t probes = 48;
    int vel_n = 8;
    int workers = 1;
};

std::vector<std::string> suite_check_ids();
std::vector<CheckResult> lemma_suite(const RunArtifacts& run, const SuiteOptions& opt);
Json report_json(const std::vector<CheckResult>& checks, const std::string& config_hash);

}  // namespace rvm
