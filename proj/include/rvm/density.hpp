#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rvm/characteristics.hpp"
#include "rvm/core_types.hpp"

namespace rvm {

// Even bump: 1 on [-1,1], 0 outside [-2,2], exp(-1/s) glued.
double psi_tilde(double s);
double dyadic_weight(int k, const Vec3& x, const Vec3& v);

struct DyadicComponent {
    int k = 1;
    const InitialData* data = nullptr;
    double sup_bound = 0.0;       // 2^{(2-k) q} eps_hyp
    double sampled_sup = 0.0;     // max of f0_k over the sampling probe
    double mass_estimate = 0.0;   // QMC estimate of the phase-space integral
    double support_radius = 0.0;  // 2^{k+1}
    double r_inner = 0.0, r_outer = 0.0;  // actual annulus of psi_{k-1}
    bool empty = false;

    double operator()(const Vec3& x, const Vec3& v) const;
};

struct DyadicBounds {
    double L1 = 1.0, L2 = 1.0, L3 = 1.0;
};
DyadicBounds dyadic_bounds(int k, double K0, double K1a);

struct Decomposition {
    std::vector<DyadicComponent> components;  // k = 1..k_max
    double tail_bound = 0.0;    // sum_{k>k_max} 2^{(2-k)q} eps_hyp vol(B_{2^k})
    double sampled_tail = 0.0;  // QMC mass of f0 beyond the last shell
};

struct TailTooLarge : ConfigError {
    using ConfigError::ConfigError;
};

Decomposition decompose(const InitialData& data, int k_max, double tail_tol = 1e-10);

struct Particle {
    Vec3 x, v;
    double w = 0.0;
};

struct ParticleEnsemble {
    int k = 1;
    std::uint64_t seed = 0;
    std::vector<Particle> particles;
    double total_weight() const;
};

// "uniform": w = f0_k * vol / N; "radial": radial importance density from a
// probe of f0_k along fixed directions, w = f0_k / (N p).
ParticleEnsemble sample_particles(const DyadicComponent& comp, std::size_t N, std::uint64_t seed,
                                  const std::string& sampler = "radial");

// f(t,x,v) = f_init(X(0), V(0)) along one backward characteristic; 0 if the
// path leaves the field domain.
double evaluate_density(const FieldOracle& field, const std::function<double(const Vec3&, const Vec3&)>& f_init,
                        double t, const Vec3& x, const Vec3& v, double tol);

double velocity_support_radius(int k, double K0_norm, double C_cfg = 4.0);

// Normalized C2 Wendland kernel with support radius h.
double wendland(double r, double h);

struct WeightedState {
    Vec3 x, v;
    double w = 0.0;
};

struct ChargeCurrent {
    double rho = 0.0;
    Vec3 j;
};
ChargeCurrent charge_current(std::span<const WeightedState> states, const Vec3& x, double h);

// mean inter-particle spacing from the weighted position covariance
double mean_spacing(std::span<const Particle> particles);

// shell header (k, seed, N) then per particle: weight and a trajectory record
void write_ensemble(std::ostream& os, const ParticleEnsemble& ens, const std::vector<Trajectory>* trajs = nullptr);
ParticleEnsemble read_ensemble(std::istream& is, std::vector<Trajectory>* trajs = nullptr);

}  // namespace rvm
