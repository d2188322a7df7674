#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rvm/core_types.hpp"

namespace rvm {

// Read-only field source; implementations must allow concurrent calls.
class FieldOracle {
public:
    virtual ~FieldOracle() = default;
    virtual FieldSample sample(double t, const Vec3& x) const = 0;
    virtual bool contains(double /*t*/, const Vec3& /*x*/) const { return true; }
};

class ZeroField final : public FieldOracle {
public:
    FieldSample sample(double, const Vec3&) const override { return {}; }
};

class UniformField final : public FieldOracle {
public:
    explicit UniformField(FieldSample k) : k_(k) {}
    FieldSample sample(double, const Vec3&) const override { return k_; }

private:
    FieldSample k_;
};

class FunctionField final : public FieldOracle {
public:
    using Fn = std::function<FieldSample(double, const Vec3&)>;
    explicit FunctionField(Fn fn) : fn_(std::move(fn)) {}
    FieldSample sample(double t, const Vec3& x) const override { return fn_(t, x); }

private:
    Fn fn_;
};

// E + vhat x B
Vec3 force(const FieldSample& k, const Vec3& v);
// rate of change of vhat: sqrt(1-|vhat|^2) (E + vhat x B - (vhat.E) vhat)
Vec3 force_hat(const FieldSample& k, const Vec3& vhat);

struct Knot {
    double s = 0.0;
    Vec3 X, V;
    Vec3 dX, dV;  // vhat and E + vhat x B at the knot
};

class Trajectory {
public:
    std::vector<Knot> knots;  // strictly increasing s
    double t_end = 0.0;       // endpoint condition time
    Vec3 x_end, v_end;
    // set when the path left the oracle domain; knots then stop at the exit
    bool exited = false;

    double s_lo() const { return knots.front().s; }
    double s_hi() const { return knots.back().s; }
    bool covers(double s) const { return !knots.empty() && s >= s_lo() && s <= s_hi(); }
    // cubic Hermite interpolant on the knot list
    PhaseState at(double s) const;
    Vec3 position(double s) const;
    std::size_t segment(double s) const;
    PhaseState at_segment(std::size_t k, double s) const;
    Vec3 position_segment(std::size_t k, double s) const;
};

struct StepUnderflow : NumericalError {
    double s;
    explicit StepUnderflow(double s_fail);
};

// Adaptive Dormand-Prince 4(5) from (t, x, v) to s_target in either direction.
Trajectory integrate_characteristic(const FieldOracle& field, double t, const PhaseState& endpoint, double s_target,
                                    double tol);

struct Intersection {
    bool found = false;
    double s = 0.0;
    Vec3 omega;  // (X(s*) - x_obs) / r
    double r = 0.0;
    Vec3 X, V;
    bool coincident = false;  // r below the coincidence threshold
    int iterations = 0;
};

struct RootNotConverged : NumericalError {
    using NumericalError::NumericalError;
};

// Root of g(s) = s + |X(s) - x_obs| - t_obs on the covered range. A hint
// holds a knot index below the root (e.g. from an earlier observer time at
// the same x) and is updated on return.
Intersection retarded_intersection(const Trajectory& traj, const SpacetimePoint& obs, double tol,
                                   double coincident_r = 1e-12, std::size_t* hint = nullptr);

struct VelocityBoundReport {
    double L = 0.0;
    double forward_ratio = 1.0;   // max over s<t of (|V(t)|+L)/(|V(s)|+L)
    double backward_ratio = 1.0;  // max over s<t of (|V(s)|+L)/(|V(t)|+L)
};
VelocityBoundReport velocity_bound_report(const std::vector<Trajectory>& trajs, double K0_norm);

// count, then per knot s, X, V as little-endian f64
void write_trajectory(std::ostream& os, const Trajectory& tr);
Trajectory read_trajectory(std::istream& is);

}  // namespace rvm
