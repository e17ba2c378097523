#include "odom/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "odom/error.hpp"

namespace odom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadPerDeg = kPi / 180.0;
}  // namespace

PointCloud load_scan(const std::string& path, int max_rings, ScanStats* stats) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("load_scan: cannot open " + path);
    const std::streamoff bytes = in.tellg();
    if (bytes % 16 != 0) {
        throw DataError("load_scan: " + path + " length " + std::to_string(bytes) +
                        " is not a multiple of 16");
    }
    in.seekg(0);
    const size_t n = static_cast<size_t>(bytes) / 16;
    std::vector<float> raw(n * 4);
    in.read(reinterpret_cast<char*>(raw.data()), bytes);
    if (!in) throw DataError("load_scan: short read on " + path);

    PointCloud cloud;
    cloud.reserve(n);
    int dropped = 0;
    for (size_t i = 0; i < n; ++i) {
        const float xf = raw[i * 4 + 0], yl = raw[i * 4 + 1], zu = raw[i * 4 + 2], refl = raw[i * 4 + 3];
        LidarPoint p;
        p.x = -static_cast<double>(yl);
        p.y = -static_cast<double>(zu);
        p.z = static_cast<double>(xf);
        p.intensity = std::clamp(static_cast<double>(refl), 0.0, 1.0);
        const bool finite = std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
        if (!finite || std::hypot(p.x, p.z) <= 0.0) {
            ++dropped;
            continue;
        }
        cloud.push_back(p);
    }
    int dropped_rings = 0;
    infer_rings(cloud, max_rings, &dropped_rings);
    if (stats) {
        stats->dropped_points = dropped;
        stats->dropped_rings = dropped_rings;
    }
    return cloud;
}

void save_scan(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_scan: cannot open " + path);
    for (const LidarPoint& p : cloud) {
        const float vals[4] = {static_cast<float>(p.z), static_cast<float>(-p.x),
                               static_cast<float>(-p.y), static_cast<float>(p.intensity)};
        out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    }
    if (!out) throw DataError("save_scan: write failed for " + path);
}

void infer_rings(PointCloud& cloud, int max_rings, int* dropped) {
    int ring = 0;
    double prev = -1.0;
    size_t keep = 0;
    int drop_count = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const double az = azimuth_deg(cloud[i].x, cloud[i].z);
        if (prev >= 0.0 && prev - az > 180.0) ++ring;
        prev = az;
        if (ring >= max_rings) {
            ++drop_count;
            continue;
        }
        cloud[keep] = cloud[i];
        cloud[keep].ring = ring;
        ++keep;
    }
    cloud.resize(keep);
    if (dropped) *dropped = drop_count;
    if (drop_count > 0) {
        std::fprintf(stderr, "warning: scan has more than %d sweeps, dropped %d points\n",
                     max_rings, drop_count);
    }
}

std::vector<Mat4> load_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_poses: cannot open " + path);
    std::vector<Mat4> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Mat4 M = Mat4::identity();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                if (!(ls >> M(r, c))) {
                    throw DataError("load_poses: " + path + ":" + std::to_string(lineno) +
                                    ": expected 12 floats");
                }
            }
        }
        if (orthonormality_error(M) > 1e-4) {
            throw DataError("load_poses: " + path + ":" + std::to_string(lineno) +
                            ": rotation block not orthonormal within 1e-4");
        }
        poses.push_back(M);
    }
    if (poses.empty()) throw DataError("load_poses: " + path + " contains no poses");
    return poses;
}

void save_poses(const std::vector<Mat4>& poses, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_poses: cannot open " + path);
    char buf[64];
    for (const Mat4& M : poses) {
        std::string line;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                std::snprintf(buf, sizeof(buf), "%.9g", M(r, c));
                if (r != 0 || c != 0) line += ' ';
                line += buf;
            }
        }
        out << line << '\n';
    }
    if (!out) throw DataError("save_poses: write failed for " + path);
}

std::vector<RigidMotion> relative_motions(const std::vector<Mat4>& poses, const Mat4* calibration) {
    if (poses.size() < 2) throw UsageError("relative_motions: need at least 2 poses");
    std::vector<RigidMotion> motions;
    motions.reserve(poses.size() - 1);
    for (size_t k = 0; k + 1 < poses.size(); ++k) {
        Mat4 rel = rigid_inverse(orthonormalized(poses[k])) * orthonormalized(poses[k + 1]);
        if (calibration) rel = *calibration * rel * rigid_inverse(*calibration);
        motions.push_back(matrix_to_euler(orthonormalized(rel)));
    }
    return motions;
}

// ---------------------------------------------------------------------------

SyntheticWorld load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_world: cannot open " + path);
    SyntheticWorld w;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) continue;
        const size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw DataError("load_world: " + path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));

        auto bad = [&](const std::string& why) {
            return DataError("load_world: " + path + ":" + std::to_string(lineno) + ": " + why);
        };
        std::istringstream vs(value);
        if (key == "box") {
            Box b;
            if (!(vs >> b.cx >> b.cy >> b.cz >> b.sx >> b.sy >> b.sz)) {
                throw bad("box needs 6 numbers: cx cy cz sx sy sz");
            }
            if (b.sx <= 0 || b.sy <= 0 || b.sz <= 0) throw bad("box extents must be positive");
            w.boxes.push_back(b);
        } else if (key == "ground_y") {
            vs >> w.ground_y;
        } else if (key == "rings") {
            vs >> w.rings;
        } else if (key == "elev_up_deg") {
            vs >> w.elev_up_deg;
        } else if (key == "elev_down_deg") {
            vs >> w.elev_down_deg;
        } else if (key == "rays_per_rev") {
            vs >> w.rays_per_rev;
        } else if (key == "max_range") {
            vs >> w.max_range;
        } else if (key == "min_range") {
            vs >> w.min_range;
        } else if (key == "intensity_noise") {
            vs >> w.intensity_noise;
        } else if (key == "frames") {
            vs >> w.frames;
        } else if (key == "trajectory") {
            if (value == "straight") w.trajectory.kind = TrajectoryKind::Straight;
            else if (value == "turn") w.trajectory.kind = TrajectoryKind::Turn;
            else if (value == "random") w.trajectory.kind = TrajectoryKind::Random;
            else throw bad("trajectory must be straight, turn or random");
        } else if (key == "speed") {
            vs >> w.trajectory.speed;
        } else if (key == "yaw_rate_deg") {
            vs >> w.trajectory.yaw_rate_deg;
        } else if (key == "speed_jitter") {
            vs >> w.trajectory.speed_jitter;
        } else if (key == "yaw_jitter_deg") {
            vs >> w.trajectory.yaw_jitter_deg;
        } else if (key == "pitch_jitter_deg") {
            vs >> w.trajectory.pitch_jitter_deg;
        } else if (key == "roll_jitter_deg") {
            vs >> w.trajectory.roll_jitter_deg;
        } else {
            throw bad("unknown key '" + key + "'");
        }
        if (vs.fail()) throw bad("bad numeric value for '" + key + "'");
    }
    if (w.rings < 1) throw DataError("load_world: rings must be >= 1");
    if (w.rays_per_rev < 1) throw DataError("load_world: rays_per_rev must be >= 1");
    return w;
}

namespace {

// Slab test against an axis-aligned box; entry distance or miss.
std::optional<double> ray_box(const double o[3], const double d[3], const Box& b) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    const double lo[3] = {b.cx - b.sx / 2, b.cy - b.sy / 2, b.cz - b.sz / 2};
    const double hi[3] = {b.cx + b.sx / 2, b.cy + b.sy / 2, b.cz + b.sz / 2};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a];
        double t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return std::nullopt;
    }
    if (tmin <= 0.0) return std::nullopt;  // origin inside or behind
    return tmin;
}

}  // namespace

std::optional<double> cast_ray(const SyntheticWorld& world, const double o[3], const double d[3],
                               int* primitive) {
    std::optional<double> best;
    int best_prim = -1;
    // Ground plane y = ground_y is primitive -1... boxes are 0..n-1, plane n.
    for (size_t i = 0; i < world.boxes.size(); ++i) {
        const auto t = ray_box(o, d, world.boxes[i]);
        if (t && (!best || *t < *best)) {
            best = t;
            best_prim = static_cast<int>(i);
        }
    }
    if (std::abs(d[1]) > 1e-15) {
        const double t = (world.ground_y - o[1]) / d[1];
        if (t > 0.0 && (!best || t < *best)) {
            best = t;
            best_prim = static_cast<int>(world.boxes.size());
        }
    }
    if (best && (*best < world.min_range || *best > world.max_range)) return std::nullopt;
    if (best && primitive) *primitive = best_prim;
    return best;
}

namespace {

std::vector<RigidMotion> make_motions(const TrajectorySpec& t, int frames, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<RigidMotion> motions;
    motions.reserve(static_cast<size_t>(std::max(0, frames - 1)));
    for (int k = 0; k + 1 < frames; ++k) {
        RigidMotion m;
        switch (t.kind) {
            case TrajectoryKind::Straight:
                m.tz = t.speed;
                break;
            case TrajectoryKind::Turn:
                m.tz = t.speed;
                m.ry = t.yaw_rate_deg * kRadPerDeg;
                break;
            case TrajectoryKind::Random:
                m.tz = std::max(0.0, t.speed + uni(rng) * t.speed_jitter);
                m.ry = (t.yaw_rate_deg + uni(rng) * t.yaw_jitter_deg) * kRadPerDeg;
                m.rx = uni(rng) * t.pitch_jitter_deg * kRadPerDeg;
                m.rz = uni(rng) * t.roll_jitter_deg * kRadPerDeg;
                break;
        }
        motions.push_back(m);
    }
    return motions;
}

}  // namespace

SimResult simulate(const SyntheticWorld& world, int frames, uint64_t seed) {
    if (frames < 1) throw UsageError("simulate: need at least one frame");
    if (world.boxes.empty() && !(world.ground_y > 0.0)) {
        throw UsageError("simulate: world has no geometry below or around the sensor");
    }
    std::mt19937_64 rng(seed);

    // Per-primitive reflectivity constants, boxes then ground plane.
    std::uniform_real_distribution<double> refl_dist(0.2, 0.9);
    std::vector<double> reflectivity(world.boxes.size() + 1);
    for (double& r : reflectivity) r = refl_dist(rng);

    SimResult result;
    result.motions = make_motions(world.trajectory, frames, rng);
    Trajectory traj = integrate(result.motions);
    result.poses = traj.poses;

    std::uniform_real_distribution<double> noise(-world.intensity_noise, world.intensity_noise);
    const int R = world.rings, A = world.rays_per_rev;
    const double elev_step = R > 1 ? (world.elev_down_deg - world.elev_up_deg) / (R - 1) : 0.0;

    for (int f = 0; f < frames; ++f) {
        const Mat4& P = result.poses[f];
        const double origin[3] = {P(0, 3), P(1, 3), P(2, 3)};
        PointCloud scan;
        scan.reserve(static_cast<size_t>(R) * A);
        for (int r = 0; r < R; ++r) {
            const double elev = (world.elev_up_deg + r * elev_step) * kRadPerDeg;
            const double ce = std::cos(elev), se = std::sin(elev);
            for (int a = 0; a < A; ++a) {
                const double az = (a + 0.5) * (2.0 * kPi / A);
                // Sensor-frame direction; elevation positive is up (-y).
                const double ds[3] = {ce * std::cos(az), -se, ce * std::sin(az)};
                double dw[3];
                for (int i = 0; i < 3; ++i) {
                    dw[i] = P(i, 0) * ds[0] + P(i, 1) * ds[1] + P(i, 2) * ds[2];
                }
                int prim = -1;
                const auto t = cast_ray(world, origin, dw, &prim);
                if (!t) continue;
                LidarPoint p;
                p.x = *t * ds[0];
                p.y = *t * ds[1];
                p.z = *t * ds[2];
                p.ring = r;
                p.intensity = std::clamp(reflectivity[prim] + noise(rng), 0.0, 1.0);
                scan.push_back(p);
            }
        }
        if (scan.empty()) {
            std::fprintf(stderr, "warning: simulated frame %d has no returns\n", f);
        }
        result.scans.push_back(std::move(scan));
    }
    return result;
}

}  // namespace odom
