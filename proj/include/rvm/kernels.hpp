#pragma once

#include "rvm/core_types.hpp"

namespace rvm {

// Algebraic cone kernels in (omega, v). All take the full momentum v so that
// 1 - |vhat|^2 = 1/(1+|v|^2) and 1 + vhat.omega stay accurate at large |v|.
namespace kernels {

// 1 + vhat.omega, computed without cancellation near omega = -v/|v|
double retard(const Vec3& omega, const Vec3& v);

Vec3 kT(const Vec3& omega, const Vec3& v);
Vec3 kz(const Vec3& omega, const Vec3& v);
// row i, column j: d/dv_j of kz_i
Mat3 kS(const Vec3& omega, const Vec3& v);

Vec3 kTB(const Vec3& omega, const Vec3& v);
Vec3 kzB(const Vec3& omega, const Vec3& v);
Mat3 kSB(const Vec3& omega, const Vec3& v);

// gradient-decomposition kernels, indexed [i][l]
Mat3 a_il(const Vec3& omega, const Vec3& v);
Mat3 d_il(const Vec3& omega, const Vec3& v);
// [i][l] -> gradient in v (index j)
std::array<std::array<Vec3, 3>, 3> grad_v_d(const Vec3& omega, const Vec3& v);

}  // namespace kernels

inline Vec3 mul(const Mat3& m, const Vec3& a) {
    return {m[0][0] * a.x + m[0][1] * a.y + m[0][2] * a.z, m[1][0] * a.x + m[1][1] * a.y + m[1][2] * a.z,
            m[2][0] * a.x + m[2][1] * a.y + m[2][2] * a.z};
}

}  // namespace rvm
