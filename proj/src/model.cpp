#include "odom/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "odom/error.hpp"

namespace odom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadPerDeg = kPi / 180.0;

char axis_letter(Axis a) { return a == Axis::X ? 'x' : (a == Axis::Y ? 'y' : 'z'); }

Axis axis_from_letter(char c) {
    switch (c) {
        case 'x': return Axis::X;
        case 'y': return Axis::Y;
        case 'z': return Axis::Z;
    }
    throw DataError(std::string("unknown axis '") + c + "'");
}
}  // namespace

const char* target_name(Target t) {
    switch (t) {
        case Target::Translation: return "translation";
        case Target::Rotation: return "rotation";
        case Target::Both: return "both";
    }
    return "?";
}

const char* rotation_source_name(RotationSource s) {
    switch (s) {
        case RotationSource::None: return "none";
        case RotationSource::Regression: return "regression";
        case RotationSource::Classification: return "classification";
    }
    return "?";
}

template <class T>
nn::Tensor<T> pair_tensor(const EncodedFrame& current, const EncodedFrame& previous) {
    if (current.rows != previous.rows || current.cols != previous.cols) {
        throw UsageError("pair_tensor: frame sizes differ");
    }
    nn::Tensor<T> t({6, current.rows, current.cols});
    const size_t plane = static_cast<size_t>(current.rows) * current.cols;
    for (size_t i = 0; i < plane; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            t.data[static_cast<size_t>(ch) * plane + i] = static_cast<T>(current.values[i * 3 + ch]);
            t.data[static_cast<size_t>(ch + 3) * plane + i] = static_cast<T>(previous.values[i * 3 + ch]);
        }
    }
    return t;
}

double decode_window(const ClassProbabilities& p, int window) {
    const int k = static_cast<int>(p.probs.size());
    if (k == 0 || static_cast<int>(p.grid_rad.size()) != k) {
        throw UsageError("decode_window: empty or inconsistent probabilities");
    }
    if (window < 1 || window > k) {
        throw UsageError("decode_window: window " + std::to_string(window) + " outside [1, " +
                         std::to_string(k) + "]");
    }
    int best = 0;
    double best_mass = -1.0;
    for (int s = 0; s + window <= k; ++s) {
        double mass = 0.0;
        for (int i = s; i < s + window; ++i) mass += p.probs[i];
        if (mass > best_mass) {
            best_mass = mass;
            best = s;
        }
    }
    if (window == 1) return p.grid_rad[best];  // max polling, exactly
    double num = 0.0, den = 0.0;
    for (int i = best; i < best + window; ++i) {
        num += p.probs[i] * p.grid_rad[i];
        den += p.probs[i];
    }
    if (den <= 0.0) throw UsageError("decode_window: zero probability mass in best window");
    return num / den;
}

// ---------------------------------------------------------------------------
// RegressionModel

template <class T>
RegressionModel<T> RegressionModel<T>::make(int previous_frames, Target target, const GridSpec& grid,
                                            nn::PartChannels channels, uint64_t seed, double height_norm) {
    if (previous_frames < 1 || previous_frames > 7) {
        throw UsageError("RegressionModel: previous-frame count must be in [1, 7]");
    }
    grid.validate();
    nn::Graph<T> g(nn::regression_graph(grid.rows, grid.cols(), previous_frames,
                                        target == Target::Both ? 6 : 3, channels));
    g.init_params(seed);
    return from_graph(previous_frames, target, grid, height_norm, std::move(g));
}

template <class T>
RegressionModel<T> RegressionModel<T>::from_graph(int previous_frames, Target target,
                                                  const GridSpec& grid, double height_norm,
                                                  nn::Graph<T> graph) {
    if (graph.input_count() != previous_frames) {
        throw IncompatibleWeightsError("regression graph has " + std::to_string(graph.input_count()) +
                                       " branches, expected " + std::to_string(previous_frames));
    }
    return RegressionModel<T>{previous_frames, target, grid, height_norm, std::move(graph)};
}

template <class T>
std::vector<double> RegressionModel<T>::predict(const std::vector<const EncodedFrame*>& frames) const {
    if (static_cast<int>(frames.size()) != previous_frames + 1) {
        throw UsageError("predict: expected " + std::to_string(previous_frames + 1) + " frames, got " +
                         std::to_string(frames.size()));
    }
    for (const EncodedFrame* f : frames) {
        if (f->rows != grid.rows || f->cols != grid.cols()) {
            throw UsageError("predict: frame size does not match the model grid");
        }
    }
    std::vector<nn::Tensor<T>> inputs;
    inputs.reserve(static_cast<size_t>(previous_frames));
    for (int i = 1; i <= previous_frames; ++i) {
        inputs.push_back(pair_tensor<T>(*frames[0], *frames[i]));
    }
    const nn::Tensor<T> out = graph.forward(inputs);
    return std::vector<double>(out.data.begin(), out.data.end());
}

// ---------------------------------------------------------------------------
// RotationClassifier

template <class T>
RotationClassifier<T> RotationClassifier<T>::make(Axis axis, int class_count, double step_deg,
                                                  const GridSpec& grid, nn::PartChannels channels,
                                                  uint64_t seed, double height_norm) {
    grid.validate();
    if (class_count < 2) throw UsageError("RotationClassifier: need at least 2 classes");
    if (axis != Axis::Y && class_count % 2 == 0) {
        throw UsageError("RotationClassifier: x/z classifiers need an odd class count so 0 is a class center");
    }
    if (step_deg <= 0.0) throw UsageError("RotationClassifier: step must be positive");
    nn::Graph<T> g(nn::classifier_graph(grid.rows, grid.cols(), class_count, channels));
    g.init_params(seed);
    return from_graph(axis, class_count, step_deg, grid, height_norm, std::move(g));
}

template <class T>
RotationClassifier<T> RotationClassifier<T>::from_graph(Axis axis, int class_count, double step_deg,
                                                        const GridSpec& grid, double height_norm,
                                                        nn::Graph<T> graph) {
    if (graph.input_count() != class_count) {
        throw IncompatibleWeightsError("classifier graph has " + std::to_string(graph.input_count()) +
                                       " branches, expected " + std::to_string(class_count));
    }
    return RotationClassifier<T>{axis, step_deg, class_count, grid, height_norm, std::move(graph)};
}

template <class T>
std::vector<double> RotationClassifier<T>::angles_rad() const {
    std::vector<double> out(static_cast<size_t>(class_count));
    const double step = step_deg * kRadPerDeg;
    const double mid = (class_count - 1) / 2.0;
    for (int i = 0; i < class_count; ++i) out[i] = (i - mid) * step;
    return out;
}

template <class T>
int RotationClassifier<T>::label_for(double angle_rad, bool* clamped) const {
    const double step = step_deg * kRadPerDeg;
    const double first = -((class_count - 1) / 2.0) * step;
    long idx = std::lround((angle_rad - first) / step);
    const bool outside = idx < 0 || idx >= class_count;
    if (clamped) *clamped = outside;
    idx = std::clamp(idx, 0L, static_cast<long>(class_count - 1));
    return static_cast<int>(idx);
}

template <class T>
std::vector<nn::Tensor<T>> RotationClassifier<T>::make_inputs(const PointCloud& current,
                                                              const EncodedFrame& previous) const {
    if (previous.rows != grid.rows || previous.cols != grid.cols()) {
        throw UsageError("classify: previous frame does not match the classifier grid");
    }
    const std::vector<double> angles = angles_rad();
    std::vector<nn::Tensor<T>> inputs(static_cast<size_t>(class_count));
    std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < class_count; ++i) {
        try {
            const PointCloud rotated = rotate_cloud(current, axis, angles[i]);
            const EncodedFrame enc = encode(rotated, grid, height_norm);
            inputs[i] = pair_tensor<T>(enc, previous);
        } catch (...) {
#pragma omp critical
            if (!eptr) eptr = std::current_exception();
        }
    }
    if (eptr) std::rethrow_exception(eptr);
    return inputs;
}

template <class T>
ClassProbabilities RotationClassifier<T>::classify(const PointCloud& current,
                                                   const EncodedFrame& previous) const {
    const std::vector<nn::Tensor<T>> inputs = make_inputs(current, previous);
    const nn::Tensor<T> out = graph.forward(inputs);
    ClassProbabilities p;
    p.probs.assign(out.data.begin(), out.data.end());
    p.grid_rad = angles_rad();
    double sum = 0.0;
    for (double v : p.probs) sum += v;
    for (double& v : p.probs) v /= sum;  // exact normalization in double
    return p;
}

// ---------------------------------------------------------------------------
// Pipeline

template <class T>
void Pipeline<T>::validate() const {
    if (window < 1) throw UsageError("pipeline: window must be >= 1");
    if (translation && translation->target == Target::Rotation) {
        throw UsageError("pipeline: translation model has target=rotation");
    }
    if (rotation_regression && rotation_regression->target != Target::Rotation) {
        throw UsageError("pipeline: rotation model must have target=rotation");
    }
    if (translation && rotation_regression) {
        if (translation->previous_frames != rotation_regression->previous_frames) {
            throw UsageError("pipeline: regression models disagree on previous-frame count");
        }
        if (translation->grid.rows != rotation_regression->grid.rows ||
            translation->grid.azimuth_step_deg != rotation_regression->grid.azimuth_step_deg) {
            throw UsageError("pipeline: regression models disagree on grid");
        }
    }
    for (size_t i = 0; i < classifiers.size(); ++i) {
        if (window > classifiers[i].class_count) {
            throw UsageError("pipeline: window larger than classifier class count");
        }
        for (size_t j = i + 1; j < classifiers.size(); ++j) {
            if (classifiers[i].axis == classifiers[j].axis) {
                throw UsageError("pipeline: duplicate classifier axis");
            }
            if (classifiers[i].grid.rows != classifiers[j].grid.rows ||
                classifiers[i].grid.azimuth_step_deg != classifiers[j].grid.azimuth_step_deg) {
                throw UsageError("pipeline: classifiers disagree on grid");
            }
        }
    }
    if (rotation_source == RotationSource::Classification && classifiers.empty()) {
        throw UsageError("pipeline: classification rotation source without classifiers");
    }
    if (rotation_source == RotationSource::Regression && !rotation_regression &&
        !(translation && translation->target == Target::Both)) {
        throw UsageError("pipeline: regression rotation source without a rotation network");
    }
}

template <class T>
int Pipeline<T>::previous_frames() const {
    if (translation) return translation->previous_frames;
    if (rotation_regression) return rotation_regression->previous_frames;
    return 0;
}

// ---------------------------------------------------------------------------
// SequenceEstimator

template <class T>
SequenceEstimator<T>::SequenceEstimator(const Pipeline<T>& pipe) : pipe_(&pipe) {
    pipe.validate();
}

template <class T>
std::optional<RigidMotion> SequenceEstimator<T>::push(const PointCloud& cloud) {
    const Pipeline<T>& p = *pipe_;
    const RegressionModel<T>* reg =
        p.translation ? &*p.translation : (p.rotation_regression ? &*p.rotation_regression : nullptr);
    const bool use_cls = p.rotation_source == RotationSource::Classification && !p.classifiers.empty();
    const int n_prev = p.previous_frames();

    if (reg) {
        EncodedFrame enc = encode(cloud, reg->grid, p.height_norm);
        if (first_) {
            window_.assign(static_cast<size_t>(n_prev) + 1, enc);
        } else {
            window_.insert(window_.begin(), std::move(enc));
            window_.pop_back();
        }
    }

    if (first_) {
        if (use_cls) {
            prev_cls_ = std::make_unique<EncodedFrame>(
                encode(cloud, p.classifiers.front().grid, p.height_norm));
        }
        first_ = false;
        return std::nullopt;
    }

    RigidMotion motion;
    std::vector<const EncodedFrame*> frames;
    for (const EncodedFrame& f : window_) frames.push_back(&f);

    if (p.translation) {
        const std::vector<double> v = p.translation->predict(frames);
        motion.tx = v[0];
        motion.ty = v[1];
        motion.tz = v[2];
        if (p.translation->target == Target::Both && p.rotation_source == RotationSource::Regression &&
            !p.rotation_regression) {
            motion.rx = v[3];
            motion.ry = v[4];
            motion.rz = v[5];
        }
    }
    if (p.rotation_source == RotationSource::Regression && p.rotation_regression) {
        const std::vector<double> v = p.rotation_regression->predict(frames);
        motion.rx = v[0];
        motion.ry = v[1];
        motion.rz = v[2];
    } else if (use_cls) {
        // The per-axis classifiers run sequentially and independently.
        for (const RotationClassifier<T>& clf : p.classifiers) {
            const ClassProbabilities probs = clf.classify(cloud, *prev_cls_);
            const double angle = decode_window(probs, p.window);
            switch (clf.axis) {
                case Axis::X: motion.rx = angle; break;
                case Axis::Y: motion.ry = angle; break;
                case Axis::Z: motion.rz = angle; break;
            }
        }
    }

    if (use_cls) {
        prev_cls_ = std::make_unique<EncodedFrame>(
            encode(cloud, p.classifiers.front().grid, p.height_norm));
    }
    return motion;
}

// ---------------------------------------------------------------------------
// Bundles

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const std::vector<std::string> kManifestKeys = {
    "format", "precision", "H", "W", "rotation_source", "N", "target",
    "reg_rows", "reg_step_deg", "cls_rows", "cls_step_deg",
    "translation", "rotation", "rot_x", "rot_y", "rot_z", "K_x", "K_y", "K_z"};

std::map<std::string, std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_bundle: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("load_bundle: " + path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        if (std::find(kManifestKeys.begin(), kManifestKeys.end(), key) == kManifestKeys.end()) {
            throw DataError("load_bundle: " + path + ": unknown key '" + key + "'");
        }
        kv[key] = value;
    }
    return kv;
}

Target parse_target(const std::string& s) {
    if (s == "translation") return Target::Translation;
    if (s == "rotation") return Target::Rotation;
    if (s == "both") return Target::Both;
    throw DataError("unknown target '" + s + "'");
}

RotationSource parse_rotation_source(const std::string& s) {
    if (s == "none") return RotationSource::None;
    if (s == "regression") return RotationSource::Regression;
    if (s == "classification") return RotationSource::Classification;
    throw DataError("unknown rotation source '" + s + "'");
}

}  // namespace

std::string bundle_precision(const std::string& dir) {
    const auto kv = read_manifest(dir + "/manifest.txt");
    auto it = kv.find("precision");
    if (it == kv.end()) throw DataError("load_bundle: manifest is missing 'precision'");
    if (it->second != "f32" && it->second != "f64") {
        throw DataError("load_bundle: bad precision '" + it->second + "'");
    }
    return it->second;
}

template <class T>
void save_bundle(const Pipeline<T>& pipe, const std::string& dir) {
    pipe.validate();
    std::filesystem::create_directories(dir);
    std::ofstream mf(dir + "/manifest.txt");
    if (!mf) throw DataError("save_bundle: cannot write " + dir + "/manifest.txt");
    mf << "format = odom-bundle-1\n";
    mf << "precision = " << (sizeof(T) == 4 ? "f32" : "f64") << "\n";
    mf << "H = " << fmt_double(pipe.height_norm) << "\n";
    mf << "W = " << pipe.window << "\n";
    mf << "rotation_source = " << rotation_source_name(pipe.rotation_source) << "\n";
    const RegressionModel<T>* reg =
        pipe.translation ? &*pipe.translation
                         : (pipe.rotation_regression ? &*pipe.rotation_regression : nullptr);
    if (reg) {
        mf << "N = " << reg->previous_frames << "\n";
        mf << "reg_rows = " << reg->grid.rows << "\n";
        mf << "reg_step_deg = " << fmt_double(reg->grid.azimuth_step_deg) << "\n";
    }
    if (pipe.translation) {
        mf << "target = " << target_name(pipe.translation->target) << "\n";
        mf << "translation = translation.net\n";
        nn::save_weights_file(pipe.translation->graph, dir + "/translation.net");
    }
    if (pipe.rotation_regression) {
        mf << "rotation = rotation.net\n";
        nn::save_weights_file(pipe.rotation_regression->graph, dir + "/rotation.net");
    }
    if (!pipe.classifiers.empty()) {
        mf << "cls_rows = " << pipe.classifiers.front().grid.rows << "\n";
        mf << "cls_step_deg = " << fmt_double(pipe.classifiers.front().grid.azimuth_step_deg) << "\n";
        for (const RotationClassifier<T>& clf : pipe.classifiers) {
            const char a = axis_letter(clf.axis);
            mf << "K_" << a << " = " << clf.class_count << "\n";
            mf << "rot_" << a << " = rot_" << a << ".net\n";
            nn::save_weights_file(clf.graph, dir + "/rot_" + std::string(1, a) + ".net");
        }
    }
    if (!mf) throw DataError("save_bundle: write failed in " + dir);
}

template <class T>
Pipeline<T> load_bundle(const std::string& dir) {
    const auto kv = read_manifest(dir + "/manifest.txt");
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("load_bundle: manifest is missing '" + key + "'");
        return it->second;
    };
    if (need("format") != "odom-bundle-1") {
        throw DataError("load_bundle: unsupported bundle format " + need("format"));
    }
    Pipeline<T> pipe;
    pipe.height_norm = std::stod(need("H"));
    pipe.window = std::stoi(need("W"));
    pipe.rotation_source = parse_rotation_source(need("rotation_source"));
    if (kv.count("translation")) {
        GridSpec grid{std::stoi(need("reg_rows")), std::stod(need("reg_step_deg"))};
        pipe.translation = RegressionModel<T>::from_graph(
            std::stoi(need("N")), parse_target(need("target")), grid, pipe.height_norm,
            nn::load_weights_file<T>(dir + "/" + kv.at("translation")));
    }
    if (kv.count("rotation")) {
        GridSpec grid{std::stoi(need("reg_rows")), std::stod(need("reg_step_deg"))};
        pipe.rotation_regression = RegressionModel<T>::from_graph(
            std::stoi(need("N")), Target::Rotation, grid, pipe.height_norm,
            nn::load_weights_file<T>(dir + "/" + kv.at("rotation")));
    }
    for (char a : {'x', 'y', 'z'}) {
        const std::string key = std::string("rot_") + a;
        if (!kv.count(key)) continue;
        GridSpec grid{std::stoi(need("cls_rows")), std::stod(need("cls_step_deg"))};
        pipe.classifiers.push_back(RotationClassifier<T>::from_graph(
            axis_from_letter(a), std::stoi(need(std::string("K_") + a)), grid.azimuth_step_deg, grid,
            pipe.height_norm, nn::load_weights_file<T>(dir + "/" + kv.at(key))));
    }
    pipe.validate();
    return pipe;
}

// ---------------------------------------------------------------------------
// Training

EncodedSequence encode_sequence(const std::vector<PointCloud>& scans,
                                const std::vector<RigidMotion>& motions, const GridSpec& grid,
                                double height_norm) {
    if (scans.size() < 2 || motions.size() + 1 != scans.size()) {
        throw UsageError("encode_sequence: need k scans and k-1 motions, k >= 2");
    }
    EncodedSequence seq;
    seq.motions = motions;
    seq.frames.resize(scans.size());
    std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(scans.size()); ++i) {
        try {
            seq.frames[i] = encode(scans[i], grid, height_norm);
        } catch (...) {
#pragma omp critical
            if (!eptr) eptr = std::current_exception();
        }
    }
    if (eptr) std::rethrow_exception(eptr);
    return seq;
}

ClassifierSequence make_classifier_sequence(std::vector<PointCloud> scans,
                                            const std::vector<RigidMotion>& motions,
                                            const GridSpec& grid, double height_norm) {
    ClassifierSequence seq;
    EncodedSequence enc = encode_sequence(scans, motions, grid, height_norm);
    seq.frames = std::move(enc.frames);
    seq.motions = std::move(enc.motions);
    seq.clouds = std::move(scans);
    return seq;
}

namespace {

template <class T>
double batch_loss(const nn::Graph<T>& g, const std::vector<nn::Sample<T>>& batch, nn::LossKind kind) {
    double total = 0.0;
    for (const nn::Sample<T>& s : batch) {
        const nn::Tensor<T> y = g.forward(s.inputs);
        if (kind == nn::LossKind::Mse) {
            double acc = 0.0;
            for (size_t i = 0; i < y.data.size(); ++i) {
                const double d = static_cast<double>(y.data[i]) - static_cast<double>(s.target[i]);
                acc += d * d;
            }
            total += acc / static_cast<double>(y.data.size());
        } else {
            total += -std::log(static_cast<double>(y.data[s.label]));
        }
    }
    return total / static_cast<double>(batch.size());
}

struct SampleRef {
    size_t seq;
    int k;
};

template <class Builder, class T>
std::vector<double> train_loop(nn::Graph<T>& graph, std::vector<SampleRef> samples, nn::LossKind kind,
                               const TrainOptions& opt, Builder build) {
    if (samples.empty()) throw UsageError("train: no usable samples");
    if (opt.batch < 1) throw UsageError("train: batch must be >= 1");
    std::mt19937_64 rng(opt.seed);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    size_t cursor = 0;
    auto next_batch = [&]() {
        std::vector<nn::Sample<T>> batch;
        batch.reserve(static_cast<size_t>(opt.batch));
        for (int b = 0; b < opt.batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(build(samples[order[cursor++]]));
        }
        return batch;
    };

    std::vector<double> log;
    if (opt.iterations == 0) {
        log.push_back(batch_loss(graph, next_batch(), kind));
        return log;
    }
    nn::SgdOptimizer<T> sgd(opt.lr, opt.momentum);
    for (int it = 0; it < opt.iterations; ++it) {
        if (opt.lr_step > 0) {
            sgd.set_lr(opt.lr * std::pow(opt.lr_decay, it / opt.lr_step));
        }
        const std::vector<nn::Sample<T>> batch = next_batch();
        const double loss = static_cast<double>(nn::train_step(graph, batch, kind, sgd));
        log.push_back(loss);
        if (opt.log && (it % 50 == 0 || it + 1 == opt.iterations)) {
            (*opt.log) << "iter " << it << " loss " << loss << " lr " << sgd.lr() << "\n";
        }
    }
    return log;
}

}  // namespace

template <class T>
std::vector<double> train_regression(RegressionModel<T>& model,
                                     const std::vector<const EncodedSequence*>& data,
                                     const TrainOptions& opt) {
    std::vector<SampleRef> samples;
    for (size_t s = 0; s < data.size(); ++s) {
        const EncodedSequence& seq = *data[s];
        if (seq.frames.size() < 2 || seq.motions.size() + 1 != seq.frames.size()) {
            throw UsageError("train_regression: sequence needs k frames and k-1 motions");
        }
        for (int k = 1; k < static_cast<int>(seq.frames.size()); ++k) samples.push_back({s, k});
    }
    const int n_prev = model.previous_frames;
    auto build = [&](const SampleRef& r) {
        const EncodedSequence& seq = *data[r.seq];
        nn::Sample<T> sample;
        for (int i = 1; i <= n_prev; ++i) {
            const int idx = std::max(0, r.k - i);
            sample.inputs.push_back(pair_tensor<T>(seq.frames[r.k], seq.frames[idx]));
        }
        const RigidMotion& m = seq.motions[r.k - 1];
        switch (model.target) {
            case Target::Translation:
                sample.target = {static_cast<T>(m.tx), static_cast<T>(m.ty), static_cast<T>(m.tz)};
                break;
            case Target::Rotation:
                sample.target = {static_cast<T>(m.rx), static_cast<T>(m.ry), static_cast<T>(m.rz)};
                break;
            case Target::Both:
                sample.target = {static_cast<T>(m.tx), static_cast<T>(m.ty), static_cast<T>(m.tz),
                                 static_cast<T>(m.rx), static_cast<T>(m.ry), static_cast<T>(m.rz)};
                break;
        }
        return sample;
    };
    return train_loop(model.graph, std::move(samples), nn::LossKind::Mse, opt, build);
}

template <class T>
std::vector<double> train_classifier(RotationClassifier<T>& clf,
                                     const std::vector<const ClassifierSequence*>& data,
                                     const TrainOptions& opt) {
    std::vector<SampleRef> samples;
    for (size_t s = 0; s < data.size(); ++s) {
        const ClassifierSequence& seq = *data[s];
        if (seq.clouds.size() != seq.frames.size() || seq.motions.size() + 1 != seq.frames.size()) {
            throw UsageError("train_classifier: sequence needs k clouds/frames and k-1 motions");
        }
        for (int k = 1; k < static_cast<int>(seq.frames.size()); ++k) samples.push_back({s, k});
    }
    long clamped_total = 0;
    auto build = [&](const SampleRef& r) {
        const ClassifierSequence& seq = *data[r.seq];
        nn::Sample<T> sample;
        sample.inputs = clf.make_inputs(seq.clouds[r.k], seq.frames[r.k - 1]);
        const RigidMotion& m = seq.motions[r.k - 1];
        const double angle = clf.axis == Axis::X ? m.rx : (clf.axis == Axis::Y ? m.ry : m.rz);
        bool clamped = false;
        sample.label = clf.label_for(angle, &clamped);
        if (clamped) ++clamped_total;
        return sample;
    };
    std::vector<double> log = train_loop(clf.graph, std::move(samples), nn::LossKind::CrossEntropy, opt, build);
    if (clamped_total > 0) {
        std::fprintf(stderr, "warning: %ld training labels fell outside the class grid and were clamped\n",
                     clamped_total);
    }
    return log;
}

// ---------------------------------------------------------------------------

template nn::Tensor<float> pair_tensor<float>(const EncodedFrame&, const EncodedFrame&);
template nn::Tensor<double> pair_tensor<double>(const EncodedFrame&, const EncodedFrame&);
template struct RegressionModel<float>;
template struct RegressionModel<double>;
template struct RotationClassifier<float>;
template struct RotationClassifier<double>;
template struct Pipeline<float>;
template struct Pipeline<double>;
template class SequenceEstimator<float>;
template class SequenceEstimator<double>;
template void save_bundle<float>(const Pipeline<float>&, const std::string&);
template void save_bundle<double>(const Pipeline<double>&, const std::string&);
template Pipeline<float> load_bundle<float>(const std::string&);
template Pipeline<double> load_bundle<double>(const std::string&);
template std::vector<double> train_regression<float>(RegressionModel<float>&, const std::vector<const EncodedSequence*>&, const TrainOptions&);
template std::vector<double> train_regression<double>(RegressionModel<double>&, const std::vector<const EncodedSequence*>&, const TrainOptions&);
template std::vector<double> train_classifier<float>(RotationClassifier<float>&, const std::vector<const ClassifierSequence*>&, const TrainOptions&);
template std::vector<double> train_classifier<double>(RotationClassifier<double>&, const std::vector<const ClassifierSequence*>&, const TrainOptions&);

}  // namespace odom
