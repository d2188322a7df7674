#include "rvm/kernels.hpp"

namespace rvm::kernels {

namespace {
struct Pre {
    double g;    // Lorentz factor
    double ig2;  // 1 - |vhat|^2
    Vec3 vh;
    double D;  // 1 + vhat.omega
};

Pre pre(const Vec3& omega, const Vec3& v) {
    Pre p;
    double vv = norm(v);
    p.g = std::sqrt(1.0 + vv * vv);
    p.ig2 = 1.0 / (p.g * p.g);
    p.vh = v / p.g;
    p.D = retard(omega, v);
    return p;
}

// P = I - vhat vhat^T, so d vhat_m / d v_j = P_mj / g
Mat3 projector(const Vec3& vh) {
    Mat3 P{};
    for (int m = 0; m < 3; ++m)
        for (int j = 0; j < 3; ++j) P[m][j] = (m == j ? 1.0 : 0.0) - vh[m] * vh[j];
    return P;
}
}  // namespace

double retard(const Vec3& omega, const Vec3& v) {
    double vv = norm(v);
    if (vv == 0.0) return 1.0;
    double g = std::sqrt(1.0 + vv * vv);
    Vec3 u = v / vv;
    double c = dot(u, omega);
    if (c > -0.5) return 1.0 + vv * c / g;
    // g + v.omega = 1/(g+|v|) + |v| (1 + c), with 1 + c = |u + omega|^2 / 2 for unit omega
    double onepc = 0.5 * norm2(u + omega);
    return (1.0 / (g + vv) + vv * onepc) / g;
}

Vec3 kT(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    return (omega + p.vh) * (p.ig2 / (p.D * p.D));
}

Vec3 kz(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    return (omega + p.vh) / p.D;
}

Mat3 kS(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    Mat3 P = projector(p.vh);
    Vec3 a = omega + p.vh;
    Mat3 out{};
    for (int j = 0; j < 3; ++j) {
        double wP = omega.x * P[0][j] + omega.y * P[1][j] + omega.z * P[2][j];
        for (int i = 0; i < 3; ++i) out[i][j] = P[i][j] / (p.g * p.D) - a[i] * wP / (p.g * p.D * p.D);
    }
    return out;
}

Vec3 kTB(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    return cross(omega, p.vh) * (-p.ig2 / (p.D * p.D));
}

Vec3 kzB(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    return cross(omega, p.vh) / p.D;
}

Mat3 kSB(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    Mat3 P = projector(p.vh);
    Vec3 a = cross(omega, p.vh);
    Mat3 out{};
    for (int j = 0; j < 3; ++j) {
        Vec3 col{P[0][j], P[1][j], P[2][j]};
        Vec3 oc = cross(omega, col);
        double wP = dot(omega, col);
        for (int i = 0; i < 3; ++i) out[i][j] = oc[i] / (p.g * p.D) - a[i] * wP / (p.g * p.D * p.D);
    }
    return out;
}

Mat3 a_il(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    double D4 = p.D * p.D * p.D * p.D;
    double g2 = p.g * p.g;
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) {
            double num = -3.0 * (omega[i] + p.vh[i]) * (omega[l] * p.ig2 + p.vh[l] * p.D) +
                         (i == l ? p.D * p.D : 0.0);
            out[i][l] = num / (g2 * D4);
        }
    return out;
}

Mat3 d_il(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    double D3 = p.D * p.D * p.D;
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) out[i][l] = -omega[l] * (omega[i] + p.vh[i]) * p.ig2 / D3;
    return out;
}

std::array<std::array<Vec3, 3>, 3> grad_v_d(const Vec3& omega, const Vec3& v) {
    Pre p = pre(omega, v);
    double g3 = p.g * p.g * p.g;
    double D3 = p.D * p.D * p.D;
    double D4 = D3 * p.D;
    std::array<std::array<Vec3, 3>, 3> out{};
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l)
            for (int j = 0; j < 3; ++j) {
                double t1 = omega[l] * (p.vh[j] * omega[i] + (i == j ? 1.0 : 0.0)) / (g3 * D3);
                double t2 = 3.0 * omega[l] * (omega[i] + p.vh[i]) * (p.vh[j] + omega[j]) / (g3 * D4);
                out[i][l][j] = -(t1 - t2);
            }
    return out;
}

}  // namespace rvm::kernels
