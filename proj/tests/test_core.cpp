#include <doctest.h>

#include <cmath>
#include <random>

#include "odom/core.hpp"
#include "odom/error.hpp"

using namespace odom;

namespace {

// Independent oracle: the rotation assembled by multiplying hand-written
// per-axis matrices, instead of the analytic composite entries.
Mat4 axis_product_oracle(const RigidMotion& m) {
    Mat4 rx = Mat4::identity(), ry = Mat4::identity(), rz = Mat4::identity();
    rx(1, 1) = std::cos(m.rx); rx(1, 2) = -std::sin(m.rx);
    rx(2, 1) = std::sin(m.rx); rx(2, 2) = std::cos(m.rx);
    ry(0, 0) = std::cos(m.ry); ry(0, 2) = std::sin(m.ry);
    ry(2, 0) = -std::sin(m.ry); ry(2, 2) = std::cos(m.ry);
    rz(0, 0) = std::cos(m.rz); rz(0, 1) = -std::sin(m.rz);
    rz(1, 0) = std::sin(m.rz); rz(1, 1) = std::cos(m.rz);
    Mat4 out = rz * ry * rx;
    out(0, 3) = m.tx;
    out(1, 3) = m.ty;
    out(2, 3) = m.tz;
    return out;
}

double max_abs_diff(const Mat4& a, const Mat4& b) {
    double worst = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(a(r, c) - b(r, c)));
    return worst;
}

RigidMotion random_motion(std::mt19937_64& rng, double angle_span, double trans_span) {
    std::uniform_real_distribution<double> ang(-angle_span, angle_span);
    std::uniform_real_distribution<double> tr(-trans_span, trans_span);
    RigidMotion m;
    m.tx = tr(rng); m.ty = tr(rng); m.tz = tr(rng);
    m.rx = ang(rng); m.ry = ang(rng); m.rz = ang(rng);
    return m;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("euler_to_matrix: zero motion is identity") {
    const Mat4 M = euler_to_matrix(RigidMotion{});
    CHECK(max_abs_diff(M, Mat4::identity()) == 0.0);
}

TEST_CASE("euler_to_matrix: pure translation") {
    RigidMotion m;
    m.tx = 1.0;
    const Mat4 M = euler_to_matrix(m);
    CHECK(M(0, 3) == 1.0);
    CHECK(M(1, 3) == 0.0);
    CHECK(M(2, 3) == 0.0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(M(r, c) == (r == c ? 1.0 : 0.0));
}

TEST_CASE("euler_to_matrix matches the per-axis matrix product") {
    RigidMotion m;
    m.rx = 0.1; m.ry = 0.2; m.rz = 0.3;
    CHECK(max_abs_diff(euler_to_matrix(m), axis_product_oracle(m)) < 1e-12);
}

TEST_CASE("euler_to_matrix rejects non-finite input") {
    RigidMotion m;
    m.ry = std::nan("");
    CHECK_THROWS_AS(euler_to_matrix(m), std::invalid_argument);
}

TEST_CASE("matrix form is a valid SE(3) element") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const Mat4 M = euler_to_matrix(random_motion(rng, 1.5, 10.0));
        CHECK(orthonormality_error(M) < 1e-9);
        CHECK(rotation_determinant(M) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(M(3, 0) == 0.0);
        CHECK(M(3, 3) == 1.0);
    }
}

TEST_CASE("matrix_to_euler: identity gives all zeros") {
    const RigidMotion m = matrix_to_euler(Mat4::identity());
    CHECK(m.tx == 0.0);
    CHECK(m.ty == 0.0);
    CHECK(m.tz == 0.0);
    CHECK(m.rx == 0.0);
    CHECK(m.ry == 0.0);
    CHECK(m.rz == 0.0);
}

TEST_CASE("euler round-trip for 1000 random small motions") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const RigidMotion m = random_motion(rng, 0.1, 5.0);
        const RigidMotion r = matrix_to_euler(euler_to_matrix(m));
        CHECK(std::abs(r.tx - m.tx) < 1e-9);
        CHECK(std::abs(r.ty - m.ty) < 1e-9);
        CHECK(std::abs(r.tz - m.tz) < 1e-9);
        CHECK(std::abs(r.rx - m.rx) < 1e-9);
        CHECK(std::abs(r.ry - m.ry) < 1e-9);
        CHECK(std::abs(r.rz - m.rz) < 1e-9);
    }
}

TEST_CASE("euler round-trip across the full working range") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 500; ++i) {
        const RigidMotion m = random_motion(rng, 1.45, 5.0);  // inside (-pi/2, pi/2)
        const RigidMotion r = matrix_to_euler(euler_to_matrix(m));
        CHECK(max_abs_diff(euler_to_matrix(r), euler_to_matrix(m)) < 1e-9);
    }
}

TEST_CASE("matrix_to_euler: gimbal lock is an explicit error") {
    RigidMotion m;
    m.ry = 1.5707963267948966;  // pi/2
    const Mat4 M = axis_product_oracle(m);
    CHECK_THROWS_AS(matrix_to_euler(M), DegenerateOrientationError);
}

TEST_CASE("matrix_to_euler rejects a non-orthonormal block") {
    Mat4 M = Mat4::identity();
    M(0, 0) = 1.1;
    CHECK_THROWS_AS(matrix_to_euler(M), std::invalid_argument);
}

TEST_CASE("compose with identity") {
    std::mt19937_64 rng(17);
    const RigidMotion m = random_motion(rng, 0.5, 3.0);
    const RigidMotion id;
    CHECK(max_abs_diff(euler_to_matrix(compose(m, id)), euler_to_matrix(m)) < 1e-12);
    CHECK(max_abs_diff(euler_to_matrix(compose(id, m)), euler_to_matrix(m)) < 1e-12);
}

TEST_CASE("compose of commuting pure translations") {
    RigidMotion a, b;
    a.tx = 1.0;
    b.ty = 2.0;
    const RigidMotion c = compose(a, b);
    CHECK(c.tx == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.ty == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(c.tz == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.rx == 0.0);
}

TEST_CASE("compose matches the matrix product") {
    std::mt19937_64 rng(19);
    for (int i = 0; i < 100; ++i) {
        const RigidMotion a = random_motion(rng, 0.4, 3.0);
        const RigidMotion b = random_motion(rng, 0.4, 3.0);
        const Mat4 want = euler_to_matrix(a) * euler_to_matrix(b);
        CHECK(max_abs_diff(euler_to_matrix(compose(a, b)), want) < 1e-9);
    }
}

TEST_CASE("compose is associative") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
        const RigidMotion a = random_motion(rng, 0.3, 2.0);
        const RigidMotion b = random_motion(rng, 0.3, 2.0);
        const RigidMotion c = random_motion(rng, 0.3, 2.0);
        const Mat4 left = euler_to_matrix(compose(compose(a, b), c));
        const Mat4 right = euler_to_matrix(compose(a, compose(b, c)));
        CHECK(max_abs_diff(left, right) < 1e-9);
    }
}

TEST_CASE("compose with invert gives identity") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 100; ++i) {
        const RigidMotion m = random_motion(rng, 0.8, 5.0);
        const Mat4 M = euler_to_matrix(compose(m, invert(m)));
        CHECK(max_abs_diff(M, Mat4::identity()) < 1e-9);
    }
}

TEST_CASE("integrate: empty list is a single identity pose") {
    const Trajectory t = integrate({});
    REQUIRE(t.poses.size() == 1);
    CHECK(max_abs_diff(t.poses[0], Mat4::identity()) == 0.0);
}

TEST_CASE("integrate: constant forward steps") {
    RigidMotion step;
    step.tz = 1.0;
    const Trajectory t = integrate(std::vector<RigidMotion>(5, step));
    REQUIRE(t.poses.size() == 6);
    for (int k = 0; k <= 5; ++k) {
        CHECK(t.poses[k](2, 3) == doctest::Approx(k).epsilon(1e-12));
        CHECK(t.poses[k](0, 3) == doctest::Approx(0.0));
    }
}

TEST_CASE("integrate matches a left-fold matrix product oracle") {
    std::mt19937_64 rng(31);
    std::vector<RigidMotion> motions;
    for (int i = 0; i < 10; ++i) motions.push_back(random_motion(rng, 0.3, 2.0));
    const Trajectory t = integrate(motions);
    Mat4 acc = Mat4::identity();
    REQUIRE(t.poses.size() == 11);
    for (size_t k = 0; k < motions.size(); ++k) {
        acc = acc * euler_to_matrix(motions[k]);
        CHECK(max_abs_diff(t.poses[k + 1], acc) < 1e-9);
    }
}

TEST_CASE("orthonormalized projects a perturbed rotation back") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> noise(-5e-5, 5e-5);
    for (int i = 0; i < 50; ++i) {
        Mat4 M = euler_to_matrix(random_motion(rng, 1.0, 2.0));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) M(r, c) += noise(rng);
        const Mat4 fixed = orthonormalized(M);
        CHECK(orthonormality_error(fixed) < 1e-10);
        CHECK(max_abs_diff(fixed, M) < 1e-3);
    }
}

}  // TEST_SUITE
