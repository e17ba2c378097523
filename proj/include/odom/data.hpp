#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odom/core.hpp"
#include "odom/encoder.hpp"

namespace odom {

// Scan files use the KITTI Velodyne convention (x forward, y left, z up);
// the working frame is x right, y down, z forward. The remap is the unique
// proper rotation between them:
//   x_work = -y_kitti, y_work = -z_kitti, z_work = x_kitti.

struct ScanStats {
    int dropped_points = 0;  // zero planar range or non-finite
    int dropped_rings = 0;   // points beyond the ring budget
};

/// Reads a KITTI .bin scan (little-endian float32 x,y,z,reflectance), remaps
/// axes, clamps intensity to [0,1] and recovers ring indices from the
/// azimuth sweep. File length not divisible by 16 bytes is a DataError.
PointCloud load_scan(const std::string& path, int max_rings = 64, ScanStats* stats = nullptr);

/// Writes a scan in KITTI .bin convention (inverse axis remap, float32).
void save_scan(const PointCloud& cloud, const std::string& path);

/// Assigns ring indices to a cloud in emission order: the ring increments
/// whenever the azimuth falls back by more than 180 degrees (one full sweep
/// ended). Points past max_rings rings are dropped with a counter.
void infer_rings(PointCloud& cloud, int max_rings = 64, int* dropped = nullptr);

/// KITTI pose file: one row-major 3x4 matrix (12 floats) per line. Rotation
/// blocks must be orthonormal within 1e-4; violations raise DataError naming
/// the line.
std::vector<Mat4> load_poses(const std::string& path);

/// Writes poses with 9 significant digits per value.
void save_poses(const std::vector<Mat4>& poses, const std::string& path);

/// Per-frame motions from absolute poses: motion[k] = inverse(pose[k]) *
/// pose[k+1], re-orthonormalized, converted to Euler parameters. An optional
/// sensor-from-reference calibration C conjugates each motion (C * M * C^-1).
std::vector<RigidMotion> relative_motions(const std::vector<Mat4>& poses,
                                          const Mat4* calibration = nullptr);

// ---------------------------------------------------------------------------
// Synthetic ray-cast LiDAR.

struct Box {
    double cx = 0, cy = 0, cz = 0;  // center, working frame
    double sx = 1, sy = 1, sz = 1;  // full extents
};

enum class TrajectoryKind { Straight, Turn, Random };

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::Straight;
    double speed = 1.0;           // meters per frame, along +z heading
    double yaw_rate_deg = 0.0;    // degrees per frame about y
    double speed_jitter = 0.0;    // uniform, Random only
    double yaw_jitter_deg = 0.0;  // uniform, Random only
    double pitch_jitter_deg = 0.0;
    double roll_jitter_deg = 0.0;
};

/// Boxes above an infinite ground plane, scanned by a rotating multi-beam
/// head. y points down, so the ground plane is y = ground_y > 0 for a sensor
/// mounted above it.
struct SyntheticWorld {
    std::vector<Box> boxes;
    double ground_y = 1.7;
    int rings = 64;
    double elev_up_deg = 2.0;      // first ring elevation
    double elev_down_deg = -24.8;  // last ring elevation
    int rays_per_rev = 2000;
    double max_range = 120.0;
    double min_range = 0.5;
    double intensity_noise = 0.05;
    TrajectorySpec trajectory;
    int frames = 100;
};

SyntheticWorld load_world(const std::string& path);

struct SimResult {
    std::vector<PointCloud> scans;     // sensor frame, emission order
    std::vector<RigidMotion> motions;  // exact frame-to-frame ground truth
    std::vector<Mat4> poses;           // absolute, poses[0] = I
};

/// Casts rings x rays_per_rev rays per frame against all primitives and
/// keeps the nearest hit. Intensity is a per-primitive constant in
/// [0.2, 0.9] plus uniform noise, clamped. Deterministic in the seed.
SimResult simulate(const SyntheticWorld& world, int frames, uint64_t seed);

/// Nearest hit distance along one ray, or nothing. Origin/direction in the
/// world frame; direction must be unit length.
std::optional<double> cast_ray(const SyntheticWorld& world, const double origin[3],
                               const double dir[3], int* primitive = nullptr);

}  // namespace odom
