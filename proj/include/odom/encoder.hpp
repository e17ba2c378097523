#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace odom {

/// One LiDAR return. Coordinates in meters, sensor frame (x right, y down,
/// z forward). ring is the laser beam index; intensity is in [0, 1].
struct LidarPoint {
    double x = 0.0, y = 0.0, z = 0.0;
    int ring = 0;
    double intensity = 0.0;
};

/// One full sensor revolution, in emission order.
using PointCloud = std::vector<LidarPoint>;

enum class Axis { X, Y, Z };

/// Geometry of the encoded matrix: one row per beam, one column per
/// azimuth interval of azimuth_step_deg degrees.
struct GridSpec {
    int rows = 64;
    double azimuth_step_deg = 1.0;

    int cols() const;
    void validate() const;  // 360 must be divisible by the step

    static GridSpec regression(int rows = 64) { return GridSpec{rows, 1.0}; }
    static GridSpec classification(int rows = 64) { return GridSpec{rows, 0.2}; }
};

/// Dense rows x cols x 3 matrix. Channels per cell: 0 = height (y/H after
/// normalization), 1 = depth (log planar range after normalization),
/// 2 = intensity. mask records which bins held at least one point before
/// interpolation. Values are cell-interleaved triples, row-major.
struct EncodedFrame {
    int rows = 0, cols = 0;
    std::vector<double> values;   // rows*cols*3
    std::vector<uint8_t> mask;    // rows*cols

    double& at(int r, int c, int ch) { return values[(static_cast<size_t>(r) * cols + c) * 3 + ch]; }
    double at(int r, int c, int ch) const { return values[(static_cast<size_t>(r) * cols + c) * 3 + ch]; }
    bool occupied(int r, int c) const { return mask[static_cast<size_t>(r) * cols + c] != 0; }

    static EncodedFrame empty(const GridSpec& g);
};

struct EncodeStats {
    int dropped_points = 0;   // bad ring / zero planar range / non-finite
    int empty_rows = 0;       // rows filled by the vertical fallback
};

/// Azimuth of a point in degrees, in [0, 360). 0 deg is +x, 90 deg is +z.
double azimuth_deg(double x, double z);

/// Polar-bin index of a valid point. Throws std::invalid_argument when the
/// ring is outside [0, rows).
std::pair<int, int> bin_assign(const LidarPoint& p, const GridSpec& g);

/// Componentwise mean of [y, planar range, intensity] over a non-empty bin.
std::array<double, 3> bin_aggregate(const LidarPoint* points, size_t count);

/// Fills unoccupied cells: 1-D linear interpolation along each row with
/// circular azimuth wrap; rows with no occupied bin copy the nearest
/// occupied row (smaller row index wins ties). The mask is not modified.
/// Throws EmptyFrameError when no cell is occupied at all.
void interpolate_empty(EncodedFrame& frame);

/// Height divided by H, depth replaced by its natural log, intensity kept.
/// A nonpositive depth at this stage is an internal invariant violation.
void normalize(EncodedFrame& frame, double H = 3.0);

/// Full encoding: bin points, average per bin, interpolate empty cells,
/// normalize. Points with an out-of-range ring, zero planar range, or
/// non-finite coordinates are dropped and counted, not errors.
EncodedFrame encode(const PointCloud& cloud, const GridSpec& g, double H = 3.0,
                    EncodeStats* stats = nullptr);

/// Every point rotated about one sensor axis; ring and intensity preserved.
PointCloud rotate_cloud(const PointCloud& cloud, Axis axis, double angle_rad);

/// Representative point of an occupied cell: azimuth-interval center, radius
/// and height recovered by inverting the normalization. Re-encoding the
/// result lands in the same cell with the same channel values.
LidarPoint cell_to_point(const EncodedFrame& frame, const GridSpec& g, int r, int c,
                         double H = 3.0);

/// Binary frame dump: "ENCF" magic, u32 rows, u32 cols, row-major float32
/// cell triples, then mask bytes.
void write_encf(const EncodedFrame& frame, std::ostream& out);
EncodedFrame read_encf(std::istream& in);
void write_encf_file(const EncodedFrame& frame, const std::string& path);
EncodedFrame read_encf_file(const std::string& path);

}  // namespace odom
