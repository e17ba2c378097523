#include "odom/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "odom/data.hpp"
#include "odom/error.hpp"

namespace odom {

namespace {

double endpoint_distance(const Mat4& a, const Mat4& b) {
    const double dx = a(0, 3) - b(0, 3);
    const double dy = a(1, 3) - b(1, 3);
    const double dz = a(2, 3) - b(2, 3);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double rotation_angle(const Mat4& M) {
    const double tr = M(0, 0) + M(1, 1) + M(2, 2);
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

}  // namespace

EvalReport subsequence_error(const Trajectory& gt, const Trajectory& est, int step) {
    if (gt.poses.size() != est.poses.size()) {
        throw UsageError("subsequence_error: trajectory lengths differ");
    }
    const int n = static_cast<int>(gt.poses.size());
    if (n < 101) throw UsageError("subsequence_error: need at least 101 frames");
    if (step < 1) throw UsageError("subsequence_error: step must be >= 1");

    // Cumulative ground-truth path length for O(1) subsequence lengths.
    std::vector<double> cum(static_cast<size_t>(n), 0.0);
    for (int k = 1; k < n; ++k) {
        cum[k] = cum[k - 1] + endpoint_distance(gt.poses[k], gt.poses[k - 1]);
    }

    EvalReport report;
    double total = 0.0;
    double rot_total = 0.0;
    int count = 0;
    for (int length = 100; length <= 800; length += 100) {
        double len_total = 0.0;
        int len_count = 0;
        for (int start = 0; start + length < n; start += step) {
            const double path = cum[start + length] - cum[start];
            if (path <= 0.0) {
                ++report.skipped_zero_length;
                continue;
            }
            const Mat4 gt_end = rigid_inverse(gt.poses[start]) * gt.poses[start + length];
            const Mat4 est_end = rigid_inverse(est.poses[start]) * est.poses[start + length];
            const double e = endpoint_distance(gt_end, est_end) / path;
            report.records.push_back({length, start, e});
            len_total += e;
            ++len_count;
            rot_total += rotation_angle(rigid_inverse(gt_end) * est_end) / path;
        }
        if (len_count > 0) {
            report.per_length[length] = {len_total / len_count, len_count};
            total += len_total;
            count += len_count;
        }
    }
    if (count == 0) throw UsageError("subsequence_error: no usable subsequence (trajectory stationary?)");
    report.headline = total / count;
    report.rot_per_meter = rot_total / count;

    // Frame-to-frame diagnostics.
    const std::vector<RigidMotion> gm = relative_motions(gt.poses);
    const std::vector<RigidMotion> em = relative_motions(est.poses);
    double t2 = 0.0, r2 = 0.0;
    for (size_t k = 0; k < gm.size(); ++k) {
        const double dt[3] = {gm[k].tx - em[k].tx, gm[k].ty - em[k].ty, gm[k].tz - em[k].tz};
        const double dr[3] = {gm[k].rx - em[k].rx, gm[k].ry - em[k].ry, gm[k].rz - em[k].rz};
        t2 += dt[0] * dt[0] + dt[1] * dt[1] + dt[2] * dt[2];
        r2 += dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2];
    }
    report.trans_rmse = std::sqrt(t2 / gm.size());
    report.rot_rmse = std::sqrt(r2 / gm.size());
    return report;
}

RigidMotion splice_motion(const RigidMotion& predicted, const RigidMotion& ground_truth, Keep keep) {
    RigidMotion out;
    if (keep == Keep::Translation) {
        out.tx = predicted.tx;
        out.ty = predicted.ty;
        out.tz = predicted.tz;
        out.rx = ground_truth.rx;
        out.ry = ground_truth.ry;
        out.rz = ground_truth.rz;
    } else {
        out.tx = ground_truth.tx;
        out.ty = ground_truth.ty;
        out.tz = ground_truth.tz;
        out.rx = predicted.rx;
        out.ry = predicted.ry;
        out.rz = predicted.rz;
    }
    return out;
}

void write_report_text(const EvalReport& r, std::ostream& out) {
    out << "subsequence error (endpoint offset / path length)\n";
    out << "  headline: " << r.headline << "\n";
    out << "  per length:\n";
    for (const auto& [length, stats] : r.per_length) {
        out << "    " << length << " frames: " << stats.first << "  (" << stats.second
            << " subsequences)\n";
    }
    if (r.skipped_zero_length > 0) {
        out << "  skipped (zero ground-truth path): " << r.skipped_zero_length << "\n";
    }
    out << "  frame-to-frame translation rmse [m]: " << r.trans_rmse << "\n";
    out << "  frame-to-frame rotation rmse [rad]: " << r.rot_rmse << "\n";
    out << "  endpoint rotation per meter [rad/m]: " << r.rot_per_meter << "\n";
}

void write_report_csv(const EvalReport& r, std::ostream& out) {
    out << "length,start,error\n";
    for (const SubseqRecord& rec : r.records) {
        out << rec.length << "," << rec.start << "," << rec.error << "\n";
    }
}

void write_trajectory_xz(const Trajectory& gt, const Trajectory& est, std::ostream& out) {
    out << "frame,gt_x,gt_z,est_x,est_z\n";
    const size_t n = std::min(gt.poses.size(), est.poses.size());
    for (size_t k = 0; k < n; ++k) {
        out << k << "," << gt.poses[k](0, 3) << "," << gt.poses[k](2, 3) << ","
            << est.poses[k](0, 3) << "," << est.poses[k](2, 3) << "\n";
    }
}

}  // namespace odom
