#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rvm/core_types.hpp"
#include "rvm/density.hpp"
#include "rvm/field_cache.hpp"
#include "rvm/fields.hpp"

namespace rvm {

// (|t-|x||+1)(t+|x|+1)
double decay_weight(double t, const Vec3& x);

struct ProbePair {
    double t = 0.0;
    Vec3 x, y;
};

// Prefix-stable Halton probes over the grid domain; a larger n is a superset.
std::vector<SpacetimePoint> k0_probes(const GridSpec& grid, std::size_t n);
// pairs with |x| <= |y| <= t inside the grid domain
std::vector<ProbePair> k1a_probe_pairs(const GridSpec& grid, std::size_t n);

struct NormReport {
    double K0 = 0.0;
    double K1a = 0.0;
    std::size_t k0_samples = 0;
    std::size_t k1a_samples = 0;
    SpacetimePoint k0_witness;
    ProbePair k1a_witness;
};

NormReport estimate_norm_K0(const FieldOracle& field, std::span<const SpacetimePoint> probes);
// adds the K1a estimate to `rep`; pairs violating |x| <= |y| <= t throw
void estimate_norm_K1alpha(const FieldOracle& field, std::span<const ProbePair> pairs, double alpha,
                           NormReport& rep);

struct Membership {
    bool pass = false;
    bool k0_ok = false;
    bool k1a_ok = false;
};
Membership membership_check(const NormReport& rep, double Lambda);

// max over probes of decay_weight * (|dE| + |dB|)
double sup_difference(const FieldOracle& a, const FieldOracle& b, std::span<const SpacetimePoint> probes,
                      SpacetimePoint* witness = nullptr);

double kinetic_energy_density(std::span<const WeightedState> states, const Vec3& x, double h);

struct IterateRecord {
    int n = 0;
    NormReport norms;
    double d_n = 0.0;
    double kinetic_max = 0.0;
    Membership member;
    ConeTally tally;
    double seconds = 0.0;
};

struct IterationOptions {
    int workers = 1;
    std::string checkpoint_dir;  // empty: no checkpoints
    std::string config_hash;
    std::string resume_manifest;  // continue after the iterate recorded here
    std::function<void(const std::string&)> log;
};

struct IterationResult {
    std::vector<IterateRecord> history;
    FieldCache field;
    FieldCache data_layer;  // linear part plus surface terms
    std::vector<ParticleEnsemble> ensembles;
    Decomposition decomposition;
    double Lambda = 0.0;
    double linear_norm = 0.0;
    double alpha = 0.0;
    double smoothing_h = 0.0;
    bool converged = false;
};

ConeOptions cone_options(const RunConfig& cfg);
SphereConfig sphere_config(const RunConfig& cfg);
VelocityConfig velocity_config(const RunConfig& cfg);
GridSpec grid_spec(const RunConfig& cfg);

// time-0 shell ensembles, seeded per shell from cfg.seed
std::vector<ParticleEnsemble> initial_ensembles(const RunConfig& cfg, const Decomposition& dec);

IterationResult run_iteration(const RunConfig& cfg, const InitialData& data, const IterationOptions& opt);

// per-iterate directory name, e.g. iter_003
std::string iterate_dir(const std::string& root, int n);

}  // namespace rvm
