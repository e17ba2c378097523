#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "odom/core.hpp"

namespace odom {

struct SubseqRecord {
    int length = 0;  // frames
    int start = 0;
    double error = 0.0;  // endpoint offset / ground-truth path length
};

struct EvalReport {
    double headline = 0.0;  // mean error over all subsequences of all lengths
    std::map<int, std::pair<double, int>> per_length;  // length -> (mean, count)
    std::vector<SubseqRecord> records;
    int skipped_zero_length = 0;   // subsequences with zero ground-truth path
    double trans_rmse = 0.0;       // frame-to-frame, meters
    double rot_rmse = 0.0;         // frame-to-frame, radians
    double rot_per_meter = 0.0;    // informational: endpoint rotation / path
};

/// Subsequence endpoint error: both trajectories are cut into pieces of
/// 100..800 frames (starts advancing by `step`), each piece is aligned to
/// its own first pose, and the endpoint offset between ground truth and
/// estimate is divided by the ground-truth path length of the piece. The
/// headline number is the mean over every piece of every length.
/// Both trajectories must have the same length, at least 101 poses.
EvalReport subsequence_error(const Trajectory& gt, const Trajectory& est, int step = 10);

enum class Keep { Translation, Rotation };

/// Euler-space parameter splice: keep the chosen half of `predicted`, take
/// the other half from `ground_truth`.
RigidMotion splice_motion(const RigidMotion& predicted, const RigidMotion& ground_truth, Keep keep);

void write_report_text(const EvalReport& r, std::ostream& out);
/// Delimited records (length,start,error), one line per subsequence.
void write_report_csv(const EvalReport& r, std::ostream& out);
/// Plot columns: frame,gt_x,gt_z,est_x,est_z.
void write_trajectory_xz(const Trajectory& gt, const Trajectory& est, std::ostream& out);

}  // namespace odom
