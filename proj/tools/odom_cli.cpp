#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "odom/config.hpp"
#include "odom/core.hpp"
#include "odom/data.hpp"
#include "odom/encoder.hpp"
#include "odom/error.hpp"
#include "odom/eval.hpp"
#include "odom/model.hpp"

namespace fs = std::filesystem;
using namespace odom;

namespace {

std::vector<std::string> list_scans(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".bin") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw DataError("no .bin scans in " + dir);
    return paths;
}

std::string frame_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d%s", index, ext);
    return buf;
}

void write_loss_log(const std::vector<double>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (double v : log) out << v << "\n";
}

void run_simulate(const RunConfig& cfg) {
    SyntheticWorld world = load_world(cfg.world);
    const int frames = cfg.frames > 0 ? cfg.frames : world.frames;
    SimResult sim = simulate(world, frames, cfg.seed);
    for (size_t f = 0; f < sim.scans.size(); ++f) {
        save_scan(sim.scans[f], cfg.out + "/" + frame_name(static_cast<int>(f), ".bin"));
    }
    save_poses(sim.poses, cfg.out + "/poses.txt");
    std::cout << "simulate: wrote " << sim.scans.size() << " scans and poses.txt to " << cfg.out << "\n";
}

void run_encode(const RunConfig& cfg) {
    const GridSpec grid{cfg.grid_rows, cfg.grid_step_deg};
    grid.validate();
    const auto paths = list_scans(cfg.dataset);
    int dropped = 0;
    for (size_t i = 0; i < paths.size(); ++i) {
        ScanStats stats;
        const PointCloud cloud = load_scan(paths[i], grid.rows, &stats);
        dropped += stats.dropped_points + stats.dropped_rings;
        const EncodedFrame frame = encode(cloud, grid, cfg.height_norm);
        write_encf_file(frame, cfg.out + "/" + frame_name(static_cast<int>(i), ".encf"));
    }
    std::cout << "encode: wrote " << paths.size() << " frames to " << cfg.out
              << " (dropped " << dropped << " points at ingest)\n";
}

Target parse_target_str(const std::string& s) {
    if (s == "translation") return Target::Translation;
    if (s == "rotation") return Target::Rotation;
    if (s == "both") return Target::Both;
    throw UsageError("bad target '" + s + "'");
}

template <class T>
void run_train_t(const RunConfig& cfg) {
    const auto paths = list_scans(cfg.dataset);
    if (paths.size() < 2) throw DataError("train: need at least 2 scans");
    const auto poses = load_poses(cfg.poses);
    if (poses.size() != paths.size()) {
        throw DataError("train: " + std::to_string(paths.size()) + " scans but " +
                        std::to_string(poses.size()) + " poses");
    }
    const std::vector<RigidMotion> motions = relative_motions(poses);
    const int ring_budget = std::max(cfg.grid_rows, cfg.cls_rows);
    std::vector<PointCloud> scans(paths.size());
    for (size_t i = 0; i < paths.size(); ++i) scans[i] = load_scan(paths[i], ring_budget);

    const nn::PartChannels channels{cfg.channels[0], cfg.channels[1], cfg.channels[2]};
    TrainOptions opt;
    opt.iterations = cfg.iterations;
    opt.batch = cfg.batch;
    opt.lr = cfg.lr;
    opt.momentum = cfg.momentum;
    opt.lr_step = cfg.lr_step;
    opt.lr_decay = cfg.lr_decay;
    opt.seed = cfg.seed;
    opt.log = &std::cout;

    Pipeline<T> pipe;
    pipe.height_norm = cfg.height_norm;
    pipe.window = cfg.window;

    if (cfg.target != "none") {
        const GridSpec grid{cfg.grid_rows, cfg.grid_step_deg};
        const Target target = parse_target_str(cfg.target);
        const EncodedSequence seq = encode_sequence(scans, motions, grid, cfg.height_norm);
        auto model = RegressionModel<T>::make(cfg.previous_frames, target, grid, channels, cfg.seed,
                                              cfg.height_norm);
        std::cout << "train: regression target=" << cfg.target << " N=" << cfg.previous_frames
                  << " params=" << model.graph.param_count() << "\n";
        write_loss_log(train_regression(model, {&seq}, opt), cfg.out + "/loss.txt");
        if (target == Target::Rotation) {
            pipe.rotation_regression.emplace(std::move(model));
        } else {
            pipe.translation.emplace(std::move(model));
        }
    }

    if (!cfg.axes.empty()) {
        const GridSpec grid{cfg.cls_rows, cfg.cls_step_deg};
        const ClassifierSequence seq = make_classifier_sequence(scans, motions, grid, cfg.height_norm);
        for (char a : cfg.axes) {
            const Axis axis = a == 'x' ? Axis::X : (a == 'y' ? Axis::Y : Axis::Z);
            const int k = a == 'x' ? cfg.k_x : (a == 'y' ? cfg.k_y : cfg.k_z);
            const uint64_t seed = cfg.seed + (a == 'x' ? 11 : (a == 'y' ? 12 : 13));
            TrainOptions clf_opt = opt;
            clf_opt.seed = seed;
            auto clf = RotationClassifier<T>::make(axis, k, cfg.cls_step_deg, grid, channels, seed,
                                                   cfg.height_norm);
            std::cout << "train: classifier axis=" << a << " K=" << k
                      << " params=" << clf.graph.param_count() << "\n";
            write_loss_log(train_classifier(clf, {&seq}, clf_opt),
                           cfg.out + "/loss_" + std::string(1, a) + ".txt");
            pipe.classifiers.push_back(std::move(clf));
        }
    }

    if (!pipe.classifiers.empty()) {
        pipe.rotation_source = RotationSource::Classification;
    } else if (pipe.rotation_regression || (pipe.translation && pipe.translation->target == Target::Both)) {
        pipe.rotation_source = RotationSource::Regression;
    } else {
        pipe.rotation_source = RotationSource::None;
    }
    save_bundle(pipe, cfg.out + "/bundle");
    std::cout << "train: bundle written to " << cfg.out << "/bundle\n";
}

void run_train(const RunConfig& cfg) {
    if (cfg.precision == "f64") {
        run_train_t<double>(cfg);
    } else {
        run_train_t<float>(cfg);
    }
}

template <class T>
void run_infer_t(const RunConfig& cfg) {
    const Pipeline<T> pipe = load_bundle<T>(cfg.bundle);
    const auto paths = list_scans(cfg.dataset);
    int ring_budget = 0;
    if (pipe.translation) ring_budget = std::max(ring_budget, pipe.translation->grid.rows);
    if (pipe.rotation_regression) ring_budget = std::max(ring_budget, pipe.rotation_regression->grid.rows);
    for (const auto& clf : pipe.classifiers) ring_budget = std::max(ring_budget, clf.grid.rows);
    if (ring_budget == 0) ring_budget = 64;

    SequenceEstimator<T> estimator(pipe);
    std::vector<RigidMotion> motions;
    for (const std::string& path : paths) {
        const PointCloud cloud = load_scan(path, ring_budget);
        if (auto m = estimator.push(cloud)) motions.push_back(*m);
    }
    const Trajectory traj = integrate(motions);
    save_poses(traj.poses, cfg.out + "/poses.txt");
    std::cout << "infer: wrote " << traj.poses.size() << " poses to " << cfg.out << "/poses.txt\n";
}

void run_infer(const RunConfig& cfg) {
    if (bundle_precision(cfg.bundle) == "f64") {
        run_infer_t<double>(cfg);
    } else {
        run_infer_t<float>(cfg);
    }
}

Trajectory rebased(const std::vector<Mat4>& poses) {
    Trajectory t;
    const Mat4 base_inv = rigid_inverse(orthonormalized(poses.front()));
    for (const Mat4& p : poses) t.poses.push_back(base_inv * p);
    return t;
}

void run_eval(const RunConfig& cfg) {
    const auto gt_poses = load_poses(cfg.gt);
    const auto est_poses = load_poses(cfg.est);
    if (gt_poses.size() != est_poses.size()) {
        throw DataError("eval: ground truth has " + std::to_string(gt_poses.size()) +
                        " poses, estimate has " + std::to_string(est_poses.size()));
    }
    Trajectory gt = rebased(gt_poses);
    Trajectory est = rebased(est_poses);
    if (cfg.splice != "none") {
        // Parameter-wise splice in Euler space, then re-integration.
        const auto gm = relative_motions(gt.poses);
        const auto em = relative_motions(est.poses);
        const Keep keep = cfg.splice == "translation" ? Keep::Translation : Keep::Rotation;
        std::vector<RigidMotion> spliced;
        spliced.reserve(em.size());
        for (size_t k = 0; k < em.size(); ++k) spliced.push_back(splice_motion(em[k], gm[k], keep));
        est = integrate(spliced);
    }
    const EvalReport report = subsequence_error(gt, est, cfg.step);
    {
        std::ofstream out(cfg.out + "/report.txt");
        if (cfg.splice != "none") {
            out << "note: estimate kept its " << cfg.splice
                << " parameters; the rest were spliced from ground truth in Euler space\n";
        }
        write_report_text(report, out);
    }
    {
        std::ofstream out(cfg.out + "/report.csv");
        write_report_csv(report, out);
    }
    {
        std::ofstream out(cfg.out + "/trajectory_xz.csv");
        write_trajectory_xz(gt, est, out);
    }
    write_report_text(report, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR odometry toolkit: encode scans, train and run siamese "
                 "odometry networks, evaluate trajectories"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    uint64_t seed = 0;
    int step = 0;
    int threads = 0;
    const char* names[] = {"simulate", "encode", "train", "infer", "eval"};
    const char* descs[] = {"generate a synthetic scan sequence with ground truth",
                           "encode scans into dense frame dumps",
                           "train odometry networks, write a model bundle",
                           "estimate a trajectory with a trained bundle",
                           "score an estimated trajectory against ground truth"};
    for (int i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "key = value configuration file")->required();
        sub->add_option("--out", out, "output directory (overrides config)");
        sub->add_option("--seed", seed, "random seed (overrides config)");
        sub->add_option("--step", step, "eval subsequence start step (overrides config)");
        sub->add_option("--threads", threads, "worker pool size, 0 = all cores");
    }
    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    try {
        RunConfig cfg = load_run_config(config_path, sub->get_name());
        if (sub->count("--out")) cfg.out = out;
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--step")) cfg.step = step;
        if (sub->count("--threads")) cfg.threads = threads;
        validate_config(cfg);
        if (cfg.threads > 0) nn::set_threads(cfg.threads);
        fs::create_directories(cfg.out);
        write_config_copy(cfg, cfg.out + "/config.txt");

        const std::string& cmd = cfg.command;
        if (cmd == "simulate") run_simulate(cfg);
        else if (cmd == "encode") run_encode(cfg);
        else if (cmd == "train") run_train(cfg);
        else if (cmd == "infer") run_infer(cfg);
        else run_eval(cfg);
        return 0;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const IncompatibleWeightsError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const EmptyFrameError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateOrientationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
