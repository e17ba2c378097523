#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "odom/error.hpp"
#include "odom/model.hpp"

using namespace odom;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

ClassProbabilities make_probs(std::vector<double> probs, double step_deg) {
    ClassProbabilities p;
    const int k = static_cast<int>(probs.size());
    p.probs = std::move(probs);
    for (int i = 0; i < k; ++i) p.grid_rad.push_back((i - (k - 1) / 2.0) * step_deg * kDeg);
    return p;
}

// Exhaustive all-windows scan, kept separate from the implementation.
double brute_force_decode(const ClassProbabilities& p, int w) {
    const int k = static_cast<int>(p.probs.size());
    double best_mass = -1.0;
    int best = 0;
    for (int s = 0; s + w <= k; ++s) {
        double mass = 0.0;
        for (int i = s; i < s + w; ++i) mass += p.probs[i];
        if (mass > best_mass) {
            best_mass = mass;
            best = s;
        }
    }
    double num = 0.0, den = 0.0;
    for (int i = best; i < best + w; ++i) {
        num += p.probs[i] * p.grid_rad[i];
        den += p.probs[i];
    }
    return num / den;
}

EncodedFrame random_frame(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> radius(2.0, 30.0);
    std::uniform_real_distribution<double> height(-2.0, 2.0);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    PointCloud cloud;
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            const double az = (c + 0.5) * g.azimuth_step_deg * kDeg;
            const double rad = radius(rng);
            cloud.push_back({rad * std::cos(az), height(rng), rad * std::sin(az), r, inten(rng)});
        }
    }
    return encode(cloud, g, 3.0);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("decode_window: W=1 is plain argmax") {
    const ClassProbabilities p = make_probs({0.1, 0.7, 0.2}, 0.2);
    CHECK(decode_window(p, 1) == 0.0);
}

TEST_CASE("decode_window: W=3 weighted average") {
    const ClassProbabilities p = make_probs({0.1, 0.7, 0.2}, 0.2);
    // (0.1*(-0.2) + 0.7*0 + 0.2*0.2) / 1.0 = +0.02 degrees
    CHECK(decode_window(p, 3) == doctest::Approx(0.02 * kDeg).epsilon(1e-12));
}

TEST_CASE("decode_window matches brute force on random vectors") {
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> raw(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const int k = 3 + static_cast<int>(rng() % 54);
        std::vector<double> probs(static_cast<size_t>(k));
        double sum = 0.0;
        for (double& v : probs) {
            v = raw(rng);
            sum += v;
        }
        for (double& v : probs) v /= sum;
        const ClassProbabilities p = make_probs(probs, 0.2);
        const int w = 1 + static_cast<int>(rng() % k);
        const double got = decode_window(p, w);
        const double want = brute_force_decode(p, w);
        CHECK(std::abs(got - want) < 1e-12);
        CHECK(got >= p.grid_rad.front() - 1e-12);
        CHECK(got <= p.grid_rad.back() + 1e-12);
    }
}

TEST_CASE("decode_window: uniform probabilities pick the lowest-index window") {
    const ClassProbabilities p = make_probs(std::vector<double>(9, 1.0 / 9.0), 0.2);
    // Window [0, 3): centroid of the first three grid angles.
    const double want = (p.grid_rad[0] + p.grid_rad[1] + p.grid_rad[2]) / 3.0;
    CHECK(decode_window(p, 3) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("decode_window rejects out-of-range windows") {
    const ClassProbabilities p = make_probs({0.5, 0.5}, 0.2);
    CHECK_THROWS_AS(decode_window(p, 0), UsageError);
    CHECK_THROWS_AS(decode_window(p, 3), UsageError);
}

TEST_CASE("classifier angle grid is arithmetic and centered on zero") {
    const GridSpec g = GridSpec::classification(8);
    const auto clf = RotationClassifier<float>::make(Axis::X, 13, 0.2, g, nn::PartChannels{2, 3, 4}, 1);
    const auto angles = clf.angles_rad();
    REQUIRE(angles.size() == 13);
    CHECK(angles.front() == doctest::Approx(-1.2 * kDeg).epsilon(1e-12));
    CHECK(angles.back() == doctest::Approx(1.2 * kDeg).epsilon(1e-12));
    CHECK(angles[6] == doctest::Approx(0.0));
    for (size_t i = 1; i < angles.size(); ++i) {
        CHECK(angles[i] - angles[i - 1] == doctest::Approx(0.2 * kDeg).epsilon(1e-12));
    }
    double mean = 0.0;
    for (double a : angles) mean += a;
    CHECK(std::abs(mean / 13) < 1e-15);
}

TEST_CASE("x and z classifiers require an odd class count") {
    const GridSpec g = GridSpec::classification(8);
    CHECK_THROWS_AS(RotationClassifier<float>::make(Axis::X, 12, 0.2, g, nn::PartChannels{2, 3, 4}, 1),
                    UsageError);
    CHECK_NOTHROW(RotationClassifier<float>::make(Axis::Y, 12, 0.2, g, nn::PartChannels{2, 3, 4}, 1));
}

TEST_CASE("label_for snaps to the nearest class and clamps the overflow") {
    const GridSpec g = GridSpec::classification(8);
    const auto clf = RotationClassifier<float>::make(Axis::Y, 56, 0.2, g, nn::PartChannels{2, 3, 4}, 1);
    const auto angles = clf.angles_rad();
    bool clamped = true;
    CHECK(clf.label_for(angles[20] + 0.04 * kDeg, &clamped) == 20);
    CHECK(!clamped);
    CHECK(clf.label_for(angles[20] + 0.11 * kDeg, &clamped) == 21);
    CHECK(clf.label_for(10.0 * kDeg, &clamped) == 55);
    CHECK(clamped);
    CHECK(clf.label_for(-10.0 * kDeg, &clamped) == 0);
    CHECK(clamped);
}

TEST_CASE("zero-weight regression model predicts zero motion") {
    const GridSpec g{8, 10.0};
    auto model = RegressionModel<float>::make(2, Target::Translation, g, nn::PartChannels{3, 4, 6}, 5);
    for (auto& [key, p] : model.graph.params()) {
        std::fill(p.w.begin(), p.w.end(), 0.0f);
        std::fill(p.b.begin(), p.b.end(), 0.0f);
    }
    std::mt19937_64 rng(107);
    const EncodedFrame f0 = random_frame(g, rng);
    const EncodedFrame f1 = random_frame(g, rng);
    const EncodedFrame f2 = random_frame(g, rng);
    const auto out = model.predict({&f2, &f1, &f0});
    REQUIRE(out.size() == 3);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 0.0);
}

TEST_CASE("predict rejects the wrong frame count or grid") {
    const GridSpec g{8, 10.0};
    auto model = RegressionModel<float>::make(1, Target::Translation, g, nn::PartChannels{3, 4, 6}, 5);
    std::mt19937_64 rng(109);
    const EncodedFrame f0 = random_frame(g, rng);
    CHECK_THROWS_AS(model.predict({&f0}), UsageError);
    const EncodedFrame wrong = random_frame(GridSpec{4, 10.0}, rng);
    CHECK_THROWS_AS(model.predict({&f0, &wrong}), UsageError);
}

TEST_CASE("regression model overfits a single frame pair") {
    const GridSpec g{8, 10.0};
    std::mt19937_64 rng(113);
    EncodedSequence seq;
    seq.frames = {random_frame(g, rng), random_frame(g, rng)};
    RigidMotion label;
    label.tx = 0.1;
    label.ty = 0.0;
    label.tz = 1.0;
    seq.motions = {label};

    auto model = RegressionModel<double>::make(1, Target::Translation, g, nn::PartChannels{3, 4, 6}, 7);
    TrainOptions opt;
    opt.iterations = 600;
    opt.batch = 1;
    opt.lr = 0.01;
    opt.momentum = 0.9;
    opt.seed = 11;
    const auto log = train_regression(model, {&seq}, opt);
    REQUIRE(log.size() == 600);
    CHECK(log.back() < 1e-7);

    const auto out = model.predict({&seq.frames[1], &seq.frames[0]});
    CHECK(std::abs(out[0] - 0.1) < 1e-3);
    CHECK(std::abs(out[1] - 0.0) < 1e-3);
    CHECK(std::abs(out[2] - 1.0) < 1e-3);
}

TEST_CASE("classifier probabilities sum to one for any weights") {
    const GridSpec g{8, 4.0};  // 90 columns, enough for the wide first stage
    auto clf = RotationClassifier<float>::make(Axis::Y, 6, 4.0, g, nn::PartChannels{2, 3, 4}, 19);
    std::mt19937_64 rng(127);
    std::uniform_real_distribution<double> radius(2.0, 20.0);
    PointCloud cloud;
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 90; ++c) {
            const double az = (c + 0.5) * 4.0 * kDeg;
            const double rad = radius(rng);
            cloud.push_back({rad * std::cos(az), 0.5, rad * std::sin(az), r, 0.5});
        }
    }
    const EncodedFrame prev = random_frame(g, rng);
    const ClassProbabilities p = clf.classify(cloud, prev);
    REQUIRE(p.probs.size() == 6);
    double sum = 0.0;
    for (double v : p.probs) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("pair_tensor stacks current over previous in planar layout") {
    const GridSpec g{2, 120.0};
    std::mt19937_64 rng(131);
    const EncodedFrame cur = random_frame(g, rng);
    const EncodedFrame prev = random_frame(g, rng);
    const auto t = pair_tensor<double>(cur, prev);
    REQUIRE(t.shape == nn::Shape{6, 2, 3});
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(t.data[(static_cast<size_t>(ch) * 2 + r) * 3 + c] == cur.at(r, c, ch));
                CHECK(t.data[(static_cast<size_t>(ch + 3) * 2 + r) * 3 + c] == prev.at(r, c, ch));
            }
        }
    }
}

TEST_CASE("bundles round-trip through save and load") {
    namespace fs = std::filesystem;
    const GridSpec reg_grid{8, 10.0};
    const GridSpec cls_grid{8, 4.0};
    Pipeline<float> pipe;
    pipe.window = 2;
    pipe.height_norm = 3.0;
    pipe.rotation_source = RotationSource::Classification;
    pipe.translation = RegressionModel<float>::make(2, Target::Translation, reg_grid,
                                                    nn::PartChannels{3, 4, 6}, 23);
    pipe.classifiers.push_back(
        RotationClassifier<float>::make(Axis::Y, 6, 4.0, cls_grid, nn::PartChannels{2, 3, 4}, 29));

    const std::string dir = (fs::temp_directory_path() / "odom_bundle_test").string();
    fs::remove_all(dir);
    save_bundle(pipe, dir);
    CHECK(bundle_precision(dir) == "f32");
    Pipeline<float> loaded = load_bundle<float>(dir);
    CHECK(loaded.window == 2);
    CHECK(loaded.rotation_source == RotationSource::Classification);
    REQUIRE(loaded.translation.has_value());
    CHECK(loaded.translation->previous_frames == 2);
    CHECK(loaded.translation->grid.rows == 8);
    REQUIRE(loaded.classifiers.size() == 1);
    CHECK(loaded.classifiers[0].class_count == 6);

    std::mt19937_64 rng(137);
    const EncodedFrame f0 = random_frame(reg_grid, rng);
    const EncodedFrame f1 = random_frame(reg_grid, rng);
    const EncodedFrame f2 = random_frame(reg_grid, rng);
    const auto a = pipe.translation->predict({&f2, &f1, &f0});
    const auto b = loaded.translation->predict({&f2, &f1, &f0});
    CHECK(a == b);
    fs::remove_all(dir);
}

TEST_CASE("sequence estimator produces one motion per frame after the first") {
    const GridSpec g{8, 10.0};
    Pipeline<float> pipe;
    pipe.rotation_source = RotationSource::None;
    pipe.translation = RegressionModel<float>::make(2, Target::Translation, g,
                                                    nn::PartChannels{3, 4, 6}, 31);
    SequenceEstimator<float> est(pipe);
    std::mt19937_64 rng(139);
    std::uniform_real_distribution<double> radius(2.0, 20.0);
    int motions = 0;
    for (int frame = 0; frame < 4; ++frame) {
        PointCloud cloud;
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 36; ++c) {
                const double az = (c + 0.5) * 10.0 * kDeg;
                const double rad = radius(rng);
                cloud.push_back({rad * std::cos(az), 0.2, rad * std::sin(az), r, 0.5});
            }
        }
        const auto m = est.push(cloud);
        if (frame == 0) {
            CHECK(!m.has_value());
        } else {
            CHECK(m.has_value());
            ++motions;
        }
    }
    CHECK(motions == 3);
}

}  // TEST_SUITE
