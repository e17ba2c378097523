#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>

#include "odom/encoder.hpp"
#include "odom/error.hpp"

using namespace odom;

namespace {

constexpr double kPi = 3.14159265358979323846;

LidarPoint pt(double x, double y, double z, int ring, double intensity) {
    return LidarPoint{x, y, z, ring, intensity};
}

// Point at the center of bin (ring, col) with the given radius/height.
LidarPoint bin_center_point(const GridSpec& g, int ring, int col, double radius, double height,
                            double intensity) {
    const double az = (col + 0.5) * g.azimuth_step_deg * kPi / 180.0;
    return pt(radius * std::cos(az), height, radius * std::sin(az), ring, intensity);
}

// Scalar circular interpolation oracle: nearest occupied neighbours on both
// sides, inverse-distance weighted.
std::vector<double> interp_row_oracle(const std::vector<double>& vals, const std::vector<bool>& occ) {
    const int n = static_cast<int>(vals.size());
    std::vector<double> out = vals;
    for (int c = 0; c < n; ++c) {
        if (occ[c]) continue;
        int dl = 0, dr = 0;
        for (int d = 1; d <= n; ++d) {
            if (occ[((c - d) % n + n) % n]) { dl = d; break; }
        }
        for (int d = 1; d <= n; ++d) {
            if (occ[(c + d) % n]) { dr = d; break; }
        }
        const double vl = vals[((c - dl) % n + n) % n];
        const double vr = vals[(c + dr) % n];
        out[c] = (vl * dr + vr * dl) / (dl + dr);
    }
    return out;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("bin_assign maps azimuth to columns") {
    const GridSpec g1{64, 1.0};
    CHECK(bin_assign(pt(1, 0, 0, 0, 0), g1) == std::pair<int, int>{0, 0});
    CHECK(bin_assign(pt(0, 0, 1, 3, 0), g1) == std::pair<int, int>{3, 90});
    CHECK(bin_assign(pt(-1, 0, 0, 7, 0), g1) == std::pair<int, int>{7, 180});
    const GridSpec g02{64, 0.2};
    CHECK(bin_assign(pt(1, 0, 0, 0, 0), g02).second == 0);
    CHECK(bin_assign(pt(0, 0, 1, 0, 0), g02).second == 450);
}

TEST_CASE("bin_assign rejects out-of-range rings") {
    const GridSpec g{4, 1.0};
    CHECK_THROWS_AS(bin_assign(pt(1, 0, 0, 4, 0), g), std::invalid_argument);
    CHECK_THROWS_AS(bin_assign(pt(1, 0, 0, -1, 0), g), std::invalid_argument);
}

TEST_CASE("bin_aggregate: single 3-4-5 point") {
    const LidarPoint p = pt(3, 1, 4, 0, 0.5);
    const auto [h, d, i] = bin_aggregate(&p, 1);
    CHECK(h == 1.0);
    CHECK(d == 5.0);
    CHECK(i == 0.5);
}

TEST_CASE("bin_aggregate: two points with equal depth") {
    const LidarPoint ps[2] = {pt(3, 1, 4, 0, 0.4), pt(0, 2, 5, 0, 0.6)};
    const auto [h, d, i] = bin_aggregate(ps, 2);
    CHECK(h == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(d == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(i == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bin_aggregate matches a brute-force mean over 100 random points") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> coord(-20.0, 20.0);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    std::vector<LidarPoint> points;
    double sh = 0, sd = 0, si = 0;
    for (int k = 0; k < 100; ++k) {
        const LidarPoint p = pt(coord(rng), coord(rng), coord(rng), 0, inten(rng));
        points.push_back(p);
        sh += p.y;
        sd += std::sqrt(p.x * p.x + p.z * p.z);
        si += p.intensity;
    }
    const auto [h, d, i] = bin_aggregate(points.data(), points.size());
    CHECK(std::abs(h - sh / 100) < 1e-12);
    CHECK(std::abs(d - sd / 100) < 1e-12);
    CHECK(std::abs(i - si / 100) < 1e-12);
}

TEST_CASE("interpolate_empty: circular midpoint on a 3-column row") {
    const GridSpec g{1, 120.0};
    EncodedFrame f = EncodedFrame::empty(g);
    f.mask[0] = 1;
    f.at(0, 0, 0) = 2.0; f.at(0, 0, 1) = 4.0; f.at(0, 0, 2) = 0.2;
    f.mask[2] = 1;
    f.at(0, 2, 0) = 6.0; f.at(0, 2, 1) = 8.0; f.at(0, 2, 2) = 0.6;
    interpolate_empty(f);
    CHECK(f.at(0, 1, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(f.at(0, 1, 1) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(f.at(0, 1, 2) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(f.mask[1] == 0);  // the mask records original occupancy
}

TEST_CASE("interpolate_empty: single occupied cell extends constantly") {
    const GridSpec g{1, 45.0};
    EncodedFrame f = EncodedFrame::empty(g);
    f.mask[3] = 1;
    f.at(0, 3, 0) = 1.5; f.at(0, 3, 1) = 7.0; f.at(0, 3, 2) = 0.9;
    interpolate_empty(f);
    for (int c = 0; c < 8; ++c) {
        CHECK(f.at(0, c, 0) == 1.5);
        CHECK(f.at(0, c, 1) == 7.0);
        CHECK(f.at(0, c, 2) == 0.9);
    }
}

TEST_CASE("interpolate_empty matches a scalar circular oracle at 50% sparsity") {
    std::mt19937_64 rng(43);
    const GridSpec g{4, 5.0};  // 72 columns
    const int cols = g.cols();
    EncodedFrame f = EncodedFrame::empty(g);
    std::uniform_real_distribution<double> val(-3.0, 9.0);
    std::bernoulli_distribution occupied(0.5);
    std::vector<std::vector<double>> rows(4, std::vector<double>(cols, 0.0));
    std::vector<std::vector<bool>> occ(4, std::vector<bool>(cols, false));
    for (int r = 0; r < 4; ++r) {
        bool any = false;
        for (int c = 0; c < cols; ++c) {
            if (occupied(rng)) {
                occ[r][c] = true;
                any = true;
                rows[r][c] = val(rng);
                f.mask[static_cast<size_t>(r) * cols + c] = 1;
                for (int ch = 0; ch < 3; ++ch) f.at(r, c, ch) = rows[r][c] + ch;
            }
        }
        if (!any) {  // keep every row occupied for this case
            occ[r][0] = true;
            rows[r][0] = val(rng);
            f.mask[static_cast<size_t>(r) * cols] = 1;
            for (int ch = 0; ch < 3; ++ch) f.at(r, 0, ch) = rows[r][0] + ch;
        }
    }
    interpolate_empty(f);
    for (int r = 0; r < 4; ++r) {
        const std::vector<double> want = interp_row_oracle(rows[r], occ[r]);
        for (int c = 0; c < cols; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(f.at(r, c, ch) == doctest::Approx(want[c] + ch).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("interpolate_empty: empty rows copy the nearest occupied row") {
    const GridSpec g{4, 90.0};
    EncodedFrame f = EncodedFrame::empty(g);
    for (int c = 0; c < 4; ++c) {
        f.mask[static_cast<size_t>(1) * 4 + c] = 1;
        f.at(1, c, 0) = 10.0 + c;
        f.mask[static_cast<size_t>(3) * 4 + c] = 1;
        f.at(3, c, 0) = 30.0 + c;
    }
    interpolate_empty(f);
    for (int c = 0; c < 4; ++c) {
        CHECK(f.at(0, c, 0) == 10.0 + c);  // nearest is row 1
        CHECK(f.at(2, c, 0) == 10.0 + c);  // tie prefers the smaller row index
    }
}

TEST_CASE("interpolate_empty rejects a fully empty frame") {
    EncodedFrame f = EncodedFrame::empty(GridSpec{2, 90.0});
    CHECK_THROWS_AS(interpolate_empty(f), EmptyFrameError);
}

TEST_CASE("normalize divides height and takes the natural log of depth") {
    const GridSpec g{1, 180.0};
    EncodedFrame f = EncodedFrame::empty(g);
    f.at(0, 0, 0) = 1.0; f.at(0, 0, 1) = 5.0; f.at(0, 0, 2) = 0.7;
    f.at(0, 1, 0) = 3.0; f.at(0, 1, 1) = std::exp(1.0); f.at(0, 1, 2) = 0.1;
    normalize(f, 3.0);
    CHECK(f.at(0, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(f.at(0, 0, 1) == doctest::Approx(1.6094379124341003).epsilon(1e-12));
    CHECK(f.at(0, 0, 2) == 0.7);
    CHECK(f.at(0, 1, 1) == doctest::Approx(1.0).epsilon(1e-12));

    EncodedFrame zero = EncodedFrame::empty(g);
    zero.at(0, 0, 1) = 1.0;  // leaves the other depth at 0
    CHECK_THROWS_AS(normalize(zero, 3.0), std::logic_error);
}

TEST_CASE("normalize maps unit depth to zero") {
    const GridSpec g{1, 360.0};
    EncodedFrame f = EncodedFrame::empty(g);
    f.at(0, 0, 1) = 1.0;
    normalize(f, 3.0);
    CHECK(f.at(0, 0, 1) == 0.0);
}

TEST_CASE("encode: one point per bin needs no interpolation") {
    const GridSpec g{2, 30.0};
    PointCloud cloud;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            cloud.push_back(bin_center_point(g, r, c, 2.0 + r + 0.1 * c, 0.5 * r - 0.02 * c,
                                             (r * g.cols() + c) % 10 / 10.0));
        }
    }
    const EncodedFrame f = encode(cloud, g, 3.0);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            REQUIRE(f.occupied(r, c));
            const LidarPoint& p = cloud[static_cast<size_t>(r) * g.cols() + c];
            CHECK(f.at(r, c, 0) == doctest::Approx(p.y / 3.0).epsilon(1e-12));
            CHECK(f.at(r, c, 1) == doctest::Approx(std::log(std::hypot(p.x, p.z))).epsilon(1e-12));
            CHECK(f.at(r, c, 2) == doctest::Approx(p.intensity).epsilon(1e-12));
        }
    }
}

TEST_CASE("encode: two points per bin average pairwise") {
    const GridSpec g{1, 90.0};
    PointCloud cloud;
    for (int c = 0; c < 4; ++c) {
        cloud.push_back(bin_center_point(g, 0, c, 3.0, 1.0, 0.2));
        cloud.push_back(bin_center_point(g, 0, c, 5.0, 2.0, 0.4));
    }
    const EncodedFrame f = encode(cloud, g, 3.0);
    for (int c = 0; c < 4; ++c) {
        CHECK(f.at(0, c, 0) == doctest::Approx(1.5 / 3.0).epsilon(1e-12));
        CHECK(f.at(0, c, 1) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(f.at(0, c, 2) == doctest::Approx(0.3).epsilon(1e-12));
    }
}

TEST_CASE("encode is permutation invariant") {
    std::mt19937_64 rng(47);
    const GridSpec g{8, 10.0};
    std::uniform_real_distribution<double> radius(1.0, 40.0);
    std::uniform_real_distribution<double> az(0.0, 2 * kPi);
    std::uniform_real_distribution<double> height(-2.0, 2.0);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    std::uniform_int_distribution<int> ring(0, 7);
    PointCloud cloud;
    for (int k = 0; k < 4000; ++k) {
        const double r = radius(rng), a = az(rng);
        cloud.push_back(pt(r * std::cos(a), height(rng), r * std::sin(a), ring(rng), inten(rng)));
    }
    const EncodedFrame f1 = encode(cloud, g, 3.0);
    std::shuffle(cloud.begin(), cloud.end(), rng);
    const EncodedFrame f2 = encode(cloud, g, 3.0);
    for (size_t i = 0; i < f1.values.size(); ++i) {
        CHECK(std::abs(f1.values[i] - f2.values[i]) <= 1e-12);
    }
    CHECK(f1.mask == f2.mask);
}

TEST_CASE("occupied cells invert to points that re-encode identically") {
    std::mt19937_64 rng(53);
    const GridSpec g{4, 6.0};
    std::uniform_real_distribution<double> radius(1.0, 30.0);
    std::uniform_real_distribution<double> az(0.0, 2 * kPi);
    std::uniform_real_distribution<double> height(-2.0, 2.0);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    std::uniform_int_distribution<int> ring(0, 3);
    PointCloud cloud;
    for (int k = 0; k < 500; ++k) {
        const double r = radius(rng), a = az(rng);
        cloud.push_back(pt(r * std::cos(a), height(rng), r * std::sin(a), ring(rng), inten(rng)));
    }
    const EncodedFrame f = encode(cloud, g, 3.0);

    PointCloud inverted;
    for (int r = 0; r < f.rows; ++r) {
        for (int c = 0; c < f.cols; ++c) {
            if (f.occupied(r, c)) inverted.push_back(cell_to_point(f, g, r, c, 3.0));
        }
    }
    const EncodedFrame f2 = encode(inverted, g, 3.0);
    CHECK(f2.mask == f.mask);
    for (int r = 0; r < f.rows; ++r) {
        for (int c = 0; c < f.cols; ++c) {
            if (!f.occupied(r, c)) continue;
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(f2.at(r, c, ch) == doctest::Approx(f.at(r, c, ch)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("encode drops bad points with a counter instead of failing") {
    const GridSpec g{2, 90.0};
    PointCloud cloud;
    cloud.push_back(bin_center_point(g, 0, 0, 4.0, 0.5, 0.5));
    cloud.push_back(pt(0, 1, 0, 0, 0.5));    // zero planar range
    cloud.push_back(pt(1, 0, 1, 9, 0.5));    // bad ring
    EncodeStats stats;
    const EncodedFrame f = encode(cloud, g, 3.0, &stats);
    CHECK(stats.dropped_points == 2);
    CHECK(f.occupied(0, 0));
}

TEST_CASE("encode rejects an empty cloud") {
    CHECK_THROWS_AS(encode(PointCloud{}, GridSpec{2, 90.0}, 3.0), EmptyFrameError);
}

TEST_CASE("rotate_cloud: zero angle is the identity") {
    const PointCloud cloud = {pt(1, 2, 3, 0, 0.5), pt(-4, 0, 2, 1, 0.25)};
    const PointCloud out = rotate_cloud(cloud, Axis::Y, 0.0);
    for (size_t i = 0; i < cloud.size(); ++i) {
        CHECK(out[i].x == cloud[i].x);
        CHECK(out[i].y == cloud[i].y);
        CHECK(out[i].z == cloud[i].z);
        CHECK(out[i].ring == cloud[i].ring);
        CHECK(out[i].intensity == cloud[i].intensity);
    }
}

TEST_CASE("rotate_cloud composes with its inverse") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    PointCloud cloud;
    for (int k = 0; k < 100; ++k) cloud.push_back(pt(coord(rng), coord(rng), coord(rng), 0, 0.5));
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
        const PointCloud back = rotate_cloud(rotate_cloud(cloud, axis, 0.37), axis, -0.37);
        for (size_t i = 0; i < cloud.size(); ++i) {
            CHECK(std::abs(back[i].x - cloud[i].x) < 1e-9);
            CHECK(std::abs(back[i].y - cloud[i].y) < 1e-9);
            CHECK(std::abs(back[i].z - cloud[i].z) < 1e-9);
        }
    }
}

TEST_CASE("y-rotation by whole azimuth steps equals a circular column shift") {
    const GridSpec g{2, 1.0};
    PointCloud cloud;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            cloud.push_back(bin_center_point(g, r, c, 5.0 + 0.01 * c + r, 0.3 * r - 0.001 * c, 0.5));
        }
    }
    const EncodedFrame base = encode(cloud, g, 3.0);
    for (int k : {-3, -1, 1, 2, 7}) {
        // Ry(theta) moves a point at azimuth a to azimuth a - theta, so a
        // rotation by +k steps shifts occupied columns down by k.
        const double theta = k * g.azimuth_step_deg * kPi / 180.0;
        const EncodedFrame rotated = encode(rotate_cloud(cloud, Axis::Y, theta), g, 3.0);
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < g.cols(); ++c) {
                const int shifted = ((c - k) % g.cols() + g.cols()) % g.cols();
                for (int ch = 0; ch < 3; ++ch) {
                    CHECK(rotated.at(r, shifted, ch) == doctest::Approx(base.at(r, c, ch)).epsilon(1e-9));
                }
            }
        }
    }
}

TEST_CASE("ENCF dump round-trips and matches the frozen golden bytes") {
    const GridSpec g{2, 120.0};
    PointCloud cloud;
    cloud.push_back(pt(1, 0.6, 0, 0, 0.5));    // row 0 col 0
    cloud.push_back(pt(-2, 1.2, 0, 0, 0.25));  // row 0 col 1
    cloud.push_back(pt(0, -0.9, 3, 1, 1.0));   // row 1 col 0
    const EncodedFrame f = encode(cloud, g, 3.0);

    std::ostringstream out(std::ios::binary);
    write_encf(f, out);
    const std::string bytes = out.str();

    static const uint8_t kGolden[] = {
        0x45, 0x4e, 0x43, 0x46, 0x02, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0xcd, 0xcc, 0x4c,
        0x3e, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x3f, 0xcd, 0xcc, 0xcc, 0x3e, 0x18, 0x72,
        0x31, 0x3f, 0x00, 0x00, 0x80, 0x3e, 0x9a, 0x99, 0x99, 0x3e, 0x1f, 0x99, 0xcf, 0x3e, 0x00,
        0x00, 0xc0, 0x3e, 0x9a, 0x99, 0x99, 0xbe, 0x54, 0x9f, 0x8c, 0x3f, 0x00, 0x00, 0x80, 0x3f,
        0x9a, 0x99, 0x99, 0xbe, 0x54, 0x9f, 0x8c, 0x3f, 0x00, 0x00, 0x80, 0x3f, 0x9a, 0x99, 0x99,
        0xbe, 0x54, 0x9f, 0x8c, 0x3f, 0x00, 0x00, 0x80, 0x3f, 0x01, 0x01, 0x00, 0x01, 0x00, 0x00};
    REQUIRE(bytes.size() == sizeof(kGolden));
    for (size_t i = 0; i < sizeof(kGolden); ++i) {
        CHECK(static_cast<uint8_t>(bytes[i]) == kGolden[i]);
    }

    std::istringstream in(bytes, std::ios::binary);
    const EncodedFrame back = read_encf(in);
    CHECK(back.rows == f.rows);
    CHECK(back.cols == f.cols);
    CHECK(back.mask == f.mask);
    for (size_t i = 0; i < f.values.size(); ++i) {
        CHECK(static_cast<float>(back.values[i]) == static_cast<float>(f.values[i]));
    }

    std::istringstream truncated(bytes.substr(0, bytes.size() - 4), std::ios::binary);
    CHECK_THROWS_AS(read_encf(truncated), DataError);
}

}  // TEST_SUITE
