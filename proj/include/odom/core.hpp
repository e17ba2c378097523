#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace odom {

/// Row-major 4x4 homogeneous transform. Value type, cheap to copy.
struct Mat4 {
    std::array<double, 16> m{};

    static Mat4 identity();

    double& operator()(int r, int c) { return m[static_cast<size_t>(r) * 4 + c]; }
    double operator()(int r, int c) const { return m[static_cast<size_t>(r) * 4 + c]; }

    friend Mat4 operator*(const Mat4& a, const Mat4& b);
};

/// 6DoF frame-to-frame motion. Sensor frame: x right, y down, z forward.
/// Translations in meters, rotations in radians about the x, y, z axes,
/// composed as Rz(rz) * Ry(ry) * Rx(rx).
struct RigidMotion {
    double tx = 0.0, ty = 0.0, tz = 0.0;
    double rx = 0.0, ry = 0.0, rz = 0.0;
};

/// Time-ordered absolute poses, one per frame. poses[0] is identity.
struct Trajectory {
    std::vector<Mat4> poses;
    double frame_period = 0.1;  // seconds
};

/// Fixed-axis Rz*Ry*Rx rotation plus translation column.
/// Throws std::invalid_argument on non-finite input.
Mat4 euler_to_matrix(const RigidMotion& m);

/// Inverse of euler_to_matrix. Requires the rotation block orthonormal
/// within 1e-6 and |ry| < pi/2 - 1e-6; throws DegenerateOrientationError
/// in the gimbal-lock region.
RigidMotion matrix_to_euler(const Mat4& M);

/// Motion whose matrix form is to_matrix(a) * to_matrix(b).
RigidMotion compose(const RigidMotion& a, const RigidMotion& b);

/// Motion whose matrix form is the rigid inverse of to_matrix(m).
RigidMotion invert(const RigidMotion& m);

/// Left-fold of per-frame motions into absolute poses.
/// poses[0] = I; poses[k] = poses[k-1] * to_matrix(motions[k-1]).
Trajectory integrate(const std::vector<RigidMotion>& motions);

/// Rigid inverse [R^T | -R^T t]; assumes the rotation block is orthonormal.
Mat4 rigid_inverse(const Mat4& M);

/// max |(R^T R - I)| over the 3x3 rotation block.
double orthonormality_error(const Mat4& M);

/// Determinant of the 3x3 rotation block.
double rotation_determinant(const Mat4& M);

/// Nearest rotation to the (near-orthonormal) rotation block, via Newton
/// iteration on the polar decomposition. Translation column preserved.
Mat4 orthonormalized(const Mat4& M);

}  // namespace odom
