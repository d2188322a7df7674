#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rvm/characteristics.hpp"
#include "rvm/core_types.hpp"

namespace rvm {

// Uniform grid on [t0, t1] x [-R, R]^3.
struct GridSpec {
    double t0 = 0.0, t1 = 1.0;
    int nt = 2;
    double R = 1.0;
    int nx = 2;

    double dt() const { return (t1 - t0) / (nt - 1); }
    double dx() const { return 2.0 * R / (nx - 1); }
    std::size_t nodes() const { return static_cast<std::size_t>(nt) * nx * nx * nx; }
    std::size_t index(int it, int ix, int iy, int iz) const {
        return ((static_cast<std::size_t>(it) * nx + ix) * nx + iy) * nx + iz;
    }
    SpacetimePoint node(std::size_t idx) const;
    SpacetimePoint node(int it, int ix, int iy, int iz) const;
    bool contains(double t, const Vec3& x) const;
    // every stride-th node of this grid
    GridSpec coarsened(int stride) const;
};

struct DomainError : NumericalError {
    using NumericalError::NumericalError;
};

class FieldCache final : public FieldOracle {
public:
    FieldCache() = default;
    explicit FieldCache(const GridSpec& g);

    const GridSpec& grid() const { return g_; }
    FieldSample sample(double t, const Vec3& x) const override;
    bool contains(double t, const Vec3& x) const override { return g_.contains(t, x); }

    FieldSample node_value(std::size_t idx) const;
    void set_node(std::size_t idx, const FieldSample& k);
    const std::vector<double>& raw() const { return data_; }

    int iterate = 0;
    double K0 = 0.0;
    double K1a = 0.0;

    // multilinear prolongation of a coarse sub-lattice onto this grid (added in place)
    void add_prolonged(const FieldCache& coarse, int stride);
    void add(const FieldCache& other);

    // binary: header (magic, grid, iterate, norms) then 6 f64 per node, little-endian
    void write(const std::string& path) const;
    static FieldCache read(const std::string& path);
    void write_sidecar(const std::string& json_path) const;

private:
    GridSpec g_;
    std::vector<double> data_;
};

}  // namespace rvm
