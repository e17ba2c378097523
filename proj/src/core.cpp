#include "odom/core.hpp"

#include <cmath>
#include <stdexcept>

#include "odom/error.hpp"

namespace odom {

Mat4 Mat4::identity() {
    Mat4 out;
    out(0, 0) = out(1, 1) = out(2, 2) = out(3, 3) = 1.0;
    return out;
}

Mat4 operator*(const Mat4& a, const Mat4& b) {
    Mat4 out;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a(r, k) * b(k, c);
            out(r, c) = acc;
        }
    }
    return out;
}

Mat4 euler_to_matrix(const RigidMotion& m) {
    const double vals[6] = {m.tx, m.ty, m.tz, m.rx, m.ry, m.rz};
    for (double v : vals) {
        if (!std::isfinite(v)) throw std::invalid_argument("euler_to_matrix: non-finite motion parameter");
    }
    const double ca = std::cos(m.rx), sa = std::sin(m.rx);
    const double cb = std::cos(m.ry), sb = std::sin(m.ry);
    const double cg = std::cos(m.rz), sg = std::sin(m.rz);

    // Analytic entries of Rz(rz) * Ry(ry) * Rx(rx).
    Mat4 M = Mat4::identity();
    M(0, 0) = cg * cb;
    M(0, 1) = -sg * ca + cg * sb * sa;
    M(0, 2) = sg * sa + cg * sb * ca;
    M(1, 0) = sg * cb;
    M(1, 1) = cg * ca + sg * sb * sa;
    M(1, 2) = -cg * sa + sg * sb * ca;
    M(2, 0) = -sb;
    M(2, 1) = cb * sa;
    M(2, 2) = cb * ca;
    M(0, 3) = m.tx;
    M(1, 3) = m.ty;
    M(2, 3) = m.tz;
    return M;
}

double orthonormality_error(const Mat4& M) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += M(k, i) * M(k, j);
            const double want = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(dot - want));
        }
    }
    return worst;
}

double rotation_determinant(const Mat4& M) {
    return M(0, 0) * (M(1, 1) * M(2, 2) - M(1, 2) * M(2, 1)) -
           M(0, 1) * (M(1, 0) * M(2, 2) - M(1, 2) * M(2, 0)) +
           M(0, 2) * (M(1, 0) * M(2, 1) - M(1, 1) * M(2, 0));
}

RigidMotion matrix_to_euler(const Mat4& M) {
    if (orthonormality_error(M) > 1e-6) {
        throw std::invalid_argument("matrix_to_euler: rotation block not orthonormal within 1e-6");
    }
    const double sb = -M(2, 0);
    const double clamped = std::max(-1.0, std::min(1.0, sb));
    const double ry = std::asin(clamped);
    constexpr double kPiHalf = 1.5707963267948966;
    if (std::abs(ry) >= kPiHalf - 1e-6) {
        throw DegenerateOrientationError("matrix_to_euler: |pitch| at pi/2, orientation degenerate");
    }
    RigidMotion out;
    out.ry = ry;
    out.rx = std::atan2(M(2, 1), M(2, 2));
    out.rz = std::atan2(M(1, 0), M(0, 0));
    out.tx = M(0, 3);
    out.ty = M(1, 3);
    out.tz = M(2, 3);
    return out;
}

RigidMotion compose(const RigidMotion& a, const RigidMotion& b) {
    return matrix_to_euler(euler_to_matrix(a) * euler_to_matrix(b));
}

Mat4 rigid_inverse(const Mat4& M) {
    Mat4 out = Mat4::identity();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out(r, c) = M(c, r);
    }
    for (int r = 0; r < 3; ++r) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += M(k, r) * M(k, 3);
        out(r, 3) = -acc;
    }
    return out;
}

RigidMotion invert(const RigidMotion& m) {
    return matrix_to_euler(rigid_inverse(euler_to_matrix(m)));
}

Trajectory integrate(const std::vector<RigidMotion>& motions) {
    Trajectory traj;
    traj.poses.reserve(motions.size() + 1);
    traj.poses.push_back(Mat4::identity());
    for (const RigidMotion& m : motions) {
        traj.poses.push_back(traj.poses.back() * euler_to_matrix(m));
    }
    return traj;
}

Mat4 orthonormalized(const Mat4& M) {
    // X <- (X + X^-T) / 2 converges quadratically to the polar factor.
    double x[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) x[r][c] = M(r, c);
    for (int iter = 0; iter < 4; ++iter) {
        const double det = x[0][0] * (x[1][1] * x[2][2] - x[1][2] * x[2][1]) -
                           x[0][1] * (x[1][0] * x[2][2] - x[1][2] * x[2][0]) +
                           x[0][2] * (x[1][0] * x[2][1] - x[1][1] * x[2][0]);
        if (std::abs(det) < 1e-12) break;
        double adj[3][3];
        adj[0][0] = x[1][1] * x[2][2] - x[1][2] * x[2][1];
        adj[0][1] = x[0][2] * x[2][1] - x[0][1] * x[2][2];
        adj[0][2] = x[0][1] * x[1][2] - x[0][2] * x[1][1];
        adj[1][0] = x[1][2] * x[2][0] - x[1][0] * x[2][2];
        adj[1][1] = x[0][0] * x[2][2] - x[0][2] * x[2][0];
        adj[1][2] = x[0][2] * x[1][0] - x[0][0] * x[1][2];
        adj[2][0] = x[1][0] * x[2][1] - x[1][1] * x[2][0];
        adj[2][1] = x[0][1] * x[2][0] - x[0][0] * x[2][1];
        adj[2][2] = x[0][0] * x[1][1] - x[0][1] * x[1][0];
        // X^-T[r][c] = adj[c][r] / det.
        double next[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) next[r][c] = 0.5 * (x[r][c] + adj[c][r] / det);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) x[r][c] = next[r][c];
    }
    Mat4 out = M;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out(r, c) = x[r][c];
    return out;
}

}  // namespace odom
