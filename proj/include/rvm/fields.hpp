#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "rvm/characteristics.hpp"
#include "rvm/core_types.hpp"
#include "rvm/density.hpp"
#include "rvm/field_cache.hpp"
#include "rvm/quadrature.hpp"

namespace rvm {

// Sphere rule for integrals over |y - x| = t. With `adapted`, the pole points
// from x toward the origin (where the data live) and cos(theta) is split into
// Gauss-Legendre panels at |y| = 3, 8, 20; otherwise a fixed product rule.
struct SphereConfig {
    int ntheta = 24;
    int nphi = 48;
    bool adapted = true;
};

class ObserverSphere {
public:
    explicit ObserverSphere(const SphereConfig& cfg);
    // fills dirs/weights (weights sum to 4 pi)
    void build(const Vec3& x, double t, SphereRule& out) const;

private:
    SphereConfig cfg_;
    SphereRule fixed_;
    GaussLegendre gl_full_, gl_;  // one panel / several panels
    std::vector<double> cphi_, sphi_;
};

struct VelocityConfig {
    double radius = 6.0;
    int nr = 12;
    int ntheta = 8;
    int nphi = 16;
};

// Kirchhoff evolution of (E0, B0): t = 0 returns the data exactly.
FieldSample kirchhoff_linear(const InitialData& data, double t, const Vec3& x, const SphereConfig& sphere);

// exact sphere integral of (1+|y|)^-k over |y-x| = t via the 1D reduction
double sphere_integral_decay(int k_exp, double t, const Vec3& x, double tol = 1e-12);
// explicit bound: 8 pi t^2/((1+t+r)(1+|t-r|)) for k = 2, 4 pi t (1+t+r)^-1 (1+|t-r|)^{2-k} for k >= 3
double sphere_integral_bound(int k_exp, double t, double r);

struct SphereBoundSample {
    double t = 0.0;
    Vec3 x;
    int k_exp = 2;
};

struct SphereBoundReport {
    std::size_t samples = 0;
    std::size_t checked = 0;  // t = 0 samples are skipped
    std::size_t violations = 0;
    double worst_ratio = 0.0;
    SphereBoundSample witness;
    // max relative gap between the 1D reduction and a direct sphere quadrature
    double max_quadrature_gap = 0.0;
};

SphereBoundReport sphere_integral_bound_check(const std::vector<SphereBoundSample>& samples, double quad_tol,
                                              const SphereConfig& direct);

// Data surface terms: E gets -(1/t) int_S int kz f0 dv dS, B gets +(1/t) int_S int kzB f0 dv dS.
class SurfaceTerms {
public:
    SurfaceTerms(const InitialData& data, const SphereConfig& sphere, const VelocityConfig& vel);
    FieldSample operator()(double t, const Vec3& x) const;
    // full product quadrature, no factorization
    FieldSample product(double t, const Vec3& x) const;
    // (1/t) int_S int 2 sqrt(1+|v|^2) f0 dv dS on the same nodes
    double majorant(double t, const Vec3& x) const;

private:
    const InitialData* data_;
    ObserverSphere sphere_;
    BallRule ball_;
    double vel_mass_ = 0.0;
};

Vec3 surface_term_Ez(const InitialData& data, const SpacetimePoint& obs, const SphereConfig& sphere,
                     const VelocityConfig& vel);

// Observers as a tensor product of positions and ascending times; index ix * ts.size() + it.
struct ObserverSet {
    std::vector<Vec3> xs;
    std::vector<double> ts;
    std::size_t size() const { return xs.size() * ts.size(); }
    SpacetimePoint at(std::size_t i) const { return {ts[i % ts.size()], xs[i / ts.size()]}; }
};

struct ConeOptions {
    double r_min = 1e-6;  // crossings closer than this are dropped and tallied
    double r_lo = 0.0;    // restrict to r in [r_lo, r_hi]
    double r_hi = std::numeric_limits<double>::infinity();
    double root_tol = 1e-12;
    double ode_tol = 1e-8;
    bool source = true;  // include the field-dependent S terms
};

struct ConeTerms {
    Vec3 ET, ES, BT, BS;
    FieldSample total() const { return {ET + ES, BT + BS}; }
    ConeTerms& operator+=(const ConeTerms& o) {
        ET += o.ET;
        ES += o.ES;
        BT += o.BT;
        BS += o.BS;
        return *this;
    }
};

struct ConeTally {
    std::size_t crossings = 0;
    std::size_t dropped = 0;
    double dropped_weight = 0.0;
    std::size_t absorbed = 0;  // path left the domain before reaching the cone
    ConeTally& operator+=(const ConeTally& o) {
        crossings += o.crossings;
        dropped += o.dropped;
        dropped_weight += o.dropped_weight;
        absorbed += o.absorbed;
        return *this;
    }
};

struct PushedParticle {
    double w = 0.0;
    Trajectory traj;
};

struct PushedEnsemble {
    int k = 1;
    std::vector<PushedParticle> particles;
};

// forward characteristics from t = 0 to t_end through `field`
PushedEnsemble push_ensemble(const ParticleEnsemble& ens, const FieldOracle& field, double t_end, double tol,
                             int workers);

void accumulate_trajectory(const Trajectory& traj, double w, const ObserverSet& obs, const FieldOracle* K_prev,
                           const ConeOptions& opt, ConeTerms* out, ConeTally& tally);

// Streams particles: each is pushed, accumulated into every observer, then discarded.
std::vector<ConeTerms> cone_fields(const std::vector<ParticleEnsemble>& ensembles, const FieldOracle& push_field,
                                   const FieldOracle* K_prev, const ObserverSet& obs, const ConeOptions& opt,
                                   ConeTally* tally, int workers);
std::vector<ConeTerms> cone_fields(const std::vector<PushedEnsemble>& ensembles, const FieldOracle* K_prev,
                                   const ObserverSet& obs, const ConeOptions& opt, ConeTally* tally, int workers);

Vec3 cone_field_ET(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const ConeOptions& opt,
                   ConeTally* tally = nullptr);
Vec3 cone_field_ES(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs,
                   const FieldOracle& K_prev, const ConeOptions& opt, ConeTally* tally = nullptr);
// B_T + B_S cone part; the full B* adds the linear and surface terms
Vec3 cone_field_B(const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const FieldOracle* K_prev,
                  const ConeOptions& opt, ConeTally* tally = nullptr);

FieldSample assemble_field(const FieldSample& linear, const FieldSample& surface, const ConeTerms& cone);

// Linear part plus surface terms at one observer.
class DataField {
public:
    DataField(const InitialData& data, const SphereConfig& sphere, const VelocityConfig& vel);
    FieldSample operator()(double t, const Vec3& x) const;

private:
    const InitialData* data_;
    SphereConfig sphere_;
    SurfaceTerms surface_;
};

struct NodeFailure : NumericalError {
    using NumericalError::NumericalError;
};

// Evaluates fn at every node (parallel); a throwing or non-finite node aborts with its coordinate.
FieldCache build_field_cache(const std::function<FieldSample(const SpacetimePoint&)>& fn, const GridSpec& grid,
                             int workers);

// Terms of d/dx_l E_T^i restricted to r in [a, b]; matrices indexed [i][l].
struct GradientDecomposition {
    Mat3 Aw{}, ATT{}, ATS{};
    ConeTally tally;
    Mat3 total() const;
};

// density(tau, y, v) evaluates f on the boundary spheres (tau = t - s).
GradientDecomposition gradient_decomposition_ET(
    const std::vector<PushedEnsemble>& ensembles, const SpacetimePoint& obs, const FieldOracle* K_prev, double a,
    double b, const std::function<double(double, const Vec3&, const Vec3&)>& density, const SphereConfig& sphere,
    const VelocityConfig& vel, const ConeOptions& opt);

}  // namespace rvm
