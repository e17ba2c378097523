#include "odom/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "odom/error.hpp"

namespace odom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegPerRad = 180.0 / kPi;
}  // namespace

int GridSpec::cols() const {
    return static_cast<int>(std::lround(360.0 / azimuth_step_deg));
}

void GridSpec::validate() const {
    if (rows <= 0) throw UsageError("GridSpec: rows must be positive");
    if (azimuth_step_deg <= 0) throw UsageError("GridSpec: azimuth step must be positive");
    const double n = 360.0 / azimuth_step_deg;
    if (std::abs(n - std::lround(n)) > 1e-9) {
        throw UsageError("GridSpec: 360 is not divisible by the azimuth step");
    }
}

EncodedFrame EncodedFrame::empty(const GridSpec& g) {
    EncodedFrame f;
    f.rows = g.rows;
    f.cols = g.cols();
    f.values.assign(static_cast<size_t>(f.rows) * f.cols * 3, 0.0);
    f.mask.assign(static_cast<size_t>(f.rows) * f.cols, 0);
    return f;
}

double azimuth_deg(double x, double z) {
    double deg = std::atan2(z, x) * kDegPerRad;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg = 0.0;
    return deg;
}

std::pair<int, int> bin_assign(const LidarPoint& p, const GridSpec& g) {
    if (p.ring < 0 || p.ring >= g.rows) {
        throw std::invalid_argument("bin_assign: ring index outside [0, rows)");
    }
    int col = static_cast<int>(std::floor(azimuth_deg(p.x, p.z) / g.azimuth_step_deg));
    if (col >= g.cols()) col = g.cols() - 1;
    return {p.ring, col};
}

std::array<double, 3> bin_aggregate(const LidarPoint* points, size_t count) {
    double h = 0.0, d = 0.0, i = 0.0;
    for (size_t k = 0; k < count; ++k) {
        const LidarPoint& p = points[k];
        h += p.y;
        d += std::hypot(p.x, p.z);
        i += p.intensity;
    }
    const double inv = 1.0 / static_cast<double>(count);
    return {h * inv, d * inv, i * inv};
}

void interpolate_empty(EncodedFrame& frame) {
    const int rows = frame.rows, cols = frame.cols;
    std::vector<uint8_t> row_has(rows, 0);
    bool any = false;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (frame.occupied(r, c)) {
                row_has[r] = 1;
                any = true;
                break;
            }
        }
    }
    if (!any) throw EmptyFrameError("interpolate_empty: frame has no occupied bin");

#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        if (!row_has[r]) continue;
        std::vector<int> occ;
        for (int c = 0; c < cols; ++c) {
            if (frame.occupied(r, c)) occ.push_back(c);
        }
        if (static_cast<int>(occ.size()) == cols) continue;
        if (occ.size() == 1) {
            const int c0 = occ[0];
            for (int c = 0; c < cols; ++c) {
                if (c == c0) continue;
                for (int ch = 0; ch < 3; ++ch) frame.at(r, c, ch) = frame.at(r, c0, ch);
            }
            continue;
        }
        // Walk the gaps between consecutive occupied columns, circularly.
        for (size_t k = 0; k < occ.size(); ++k) {
            const int cl = occ[k];
            const int cr = occ[(k + 1) % occ.size()];
            const int gap = (cr - cl + cols) % cols;
            if (gap <= 1) continue;
            for (int d = 1; d < gap; ++d) {
                const int c = (cl + d) % cols;
                const double t = static_cast<double>(d) / gap;
                for (int ch = 0; ch < 3; ++ch) {
                    frame.at(r, c, ch) = frame.at(r, cl, ch) + (frame.at(r, cr, ch) - frame.at(r, cl, ch)) * t;
                }
            }
        }
    }

    // Vertical fallback: empty rows copy the nearest interpolated row.
    for (int r = 0; r < rows; ++r) {
        if (row_has[r]) continue;
        int src = -1;
        for (int d = 1; d < rows; ++d) {
            if (r - d >= 0 && row_has[r - d]) { src = r - d; break; }
            if (r + d < rows && row_has[r + d]) { src = r + d; break; }
        }
        for (int c = 0; c < cols; ++c) {
            for (int ch = 0; ch < 3; ++ch) frame.at(r, c, ch) = frame.at(src, c, ch);
        }
    }
}

void normalize(EncodedFrame& frame, double H) {
    const int rows = frame.rows, cols = frame.cols;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!(frame.at(r, c, 1) > 0.0)) {
                throw std::logic_error("normalize: nonpositive depth reached normalization");
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            frame.at(r, c, 0) /= H;
            frame.at(r, c, 1) = std::log(frame.at(r, c, 1));
        }
    }
}

EncodedFrame encode(const PointCloud& cloud, const GridSpec& g, double H, EncodeStats* stats) {
    g.validate();
    if (cloud.empty()) throw EmptyFrameError("encode: empty point cloud");

    EncodedFrame frame = EncodedFrame::empty(g);
    const int cols = frame.cols;
    std::vector<double> sum(static_cast<size_t>(g.rows) * cols * 3, 0.0);
    std::vector<int> count(static_cast<size_t>(g.rows) * cols, 0);
    int dropped = 0;

    for (const LidarPoint& p : cloud) {
        const bool finite = std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
                            std::isfinite(p.intensity);
        const double range = std::hypot(p.x, p.z);
        if (!finite || range <= 0.0 || p.ring < 0 || p.ring >= g.rows) {
            ++dropped;
            continue;
        }
        const auto [r, c] = bin_assign(p, g);
        const size_t cell = static_cast<size_t>(r) * cols + c;
        sum[cell * 3 + 0] += p.y;
        sum[cell * 3 + 1] += range;
        sum[cell * 3 + 2] += p.intensity;
        count[cell] += 1;
    }

    bool any = false;
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const size_t cell = static_cast<size_t>(r) * cols + c;
            if (count[cell] == 0) continue;
            any = true;
            frame.mask[cell] = 1;
            const double inv = 1.0 / count[cell];
            for (int ch = 0; ch < 3; ++ch) frame.at(r, c, ch) = sum[cell * 3 + ch] * inv;
        }
    }
    if (!any) throw EmptyFrameError("encode: every point was dropped at ingest");

    if (stats) {
        stats->dropped_points = dropped;
        stats->empty_rows = 0;
        for (int r = 0; r < g.rows; ++r) {
            bool has = false;
            for (int c = 0; c < cols && !has; ++c) has = frame.occupied(r, c);
            if (!has) ++stats->empty_rows;
        }
    }

    interpolate_empty(frame);
    normalize(frame, H);
    return frame;
}

PointCloud rotate_cloud(const PointCloud& cloud, Axis axis, double angle_rad) {
    if (!std::isfinite(angle_rad)) throw std::invalid_argument("rotate_cloud: non-finite angle");
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    PointCloud out(cloud.size());
#pragma omp parallel for schedule(static) if (cloud.size() > 16384)
    for (long long i = 0; i < static_cast<long long>(cloud.size()); ++i) {
        const LidarPoint& p = cloud[i];
        LidarPoint q = p;
        switch (axis) {
            case Axis::X:
                q.y = c * p.y - s * p.z;
                q.z = s * p.y + c * p.z;
                break;
            case Axis::Y:
                q.x = c * p.x + s * p.z;
                q.z = -s * p.x + c * p.z;
                break;
            case Axis::Z:
                q.x = c * p.x - s * p.y;
                q.y = s * p.x + c * p.y;
                break;
        }
        out[i] = q;
    }
    return out;
}

LidarPoint cell_to_point(const EncodedFrame& frame, const GridSpec& g, int r, int c, double H) {
    const double az = (c + 0.5) * g.azimuth_step_deg / kDegPerRad;
    const double depth = std::exp(frame.at(r, c, 1));
    LidarPoint p;
    p.x = depth * std::cos(az);
    p.z = depth * std::sin(az);
    p.y = frame.at(r, c, 0) * H;
    p.ring = r;
    p.intensity = frame.at(r, c, 2);
    return p;
}

namespace {
template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void write_encf(const EncodedFrame& frame, std::ostream& out) {
    out.write("ENCF", 4);
    write_raw<uint32_t>(out, static_cast<uint32_t>(frame.rows));
    write_raw<uint32_t>(out, static_cast<uint32_t>(frame.cols));
    for (double v : frame.values) write_raw<float>(out, static_cast<float>(v));
    out.write(reinterpret_cast<const char*>(frame.mask.data()),
              static_cast<std::streamsize>(frame.mask.size()));
}

EncodedFrame read_encf(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "ENCF", 4) != 0) {
        throw DataError("read_encf: bad magic, not an ENCF dump");
    }
    EncodedFrame f;
    f.rows = static_cast<int>(read_raw<uint32_t>(in));
    f.cols = static_cast<int>(read_raw<uint32_t>(in));
    if (!in || f.rows <= 0 || f.cols <= 0) throw DataError("read_encf: bad dimensions");
    const size_t cells = static_cast<size_t>(f.rows) * f.cols;
    f.values.resize(cells * 3);
    for (double& v : f.values) v = read_raw<float>(in);
    f.mask.resize(cells);
    in.read(reinterpret_cast<char*>(f.mask.data()), static_cast<std::streamsize>(cells));
    if (!in) throw DataError("read_encf: truncated dump");
    return f;
}

void write_encf_file(const EncodedFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_encf_file: cannot open " + path);
    write_encf(frame, out);
}

EncodedFrame read_encf_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_encf_file: cannot open " + path);
    return read_encf(in);
}

}  // namespace odom
