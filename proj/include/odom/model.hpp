#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odom/core.hpp"
#include "odom/encoder.hpp"
#include "odom/nn.hpp"
#include "odom/topology.hpp"

namespace odom {

enum class Target { Translation, Rotation, Both };
enum class RotationSource { None, Regression, Classification };

const char* target_name(Target t);
const char* rotation_source_name(RotationSource s);

/// Frame pair stacked into a 6-channel network input: channels 0..2 hold the
/// current frame, 3..5 the previous one.
template <class T>
nn::Tensor<T> pair_tensor(const EncodedFrame& current, const EncodedFrame& previous);

/// Class probabilities over a sampled rotation grid. Angles ascend, are
/// arithmetic with the classifier's step, and are centered on zero.
struct ClassProbabilities {
    std::vector<double> probs;
    std::vector<double> grid_rad;
};

/// Maximum-likelihood window decode: pick the contiguous window of `window`
/// classes with the largest probability mass (ties go to the lowest start
/// index) and return the probability-weighted mean angle inside it.
/// window == 1 degenerates to plain argmax; window == K uses the full grid.
double decode_window(const ClassProbabilities& p, int window);

/// Siamese regression net over the current frame and N previous frames.
template <class T>
struct RegressionModel {
    int previous_frames;  // N
    Target target;
    GridSpec grid;
    double height_norm;
    nn::Graph<T> graph;

    static RegressionModel make(int previous_frames, Target target, const GridSpec& grid,
                                nn::PartChannels channels, uint64_t seed, double height_norm = 3.0);
    static RegressionModel from_graph(int previous_frames, Target target, const GridSpec& grid,
                                      double height_norm, nn::Graph<T> graph);

    int output_dim() const { return target == Target::Both ? 6 : 3; }

    /// frames are newest-first and must be exactly N+1 at the model grid.
    /// Returns (tx,ty,tz), (rx,ry,rz) or both, per target.
    std::vector<double> predict(const std::vector<const EncodedFrame*>& frames) const;
};

/// Per-axis rotation classifier over K densely sampled angles.
template <class T>
struct RotationClassifier {
    Axis axis;
    double step_deg;
    int class_count;  // K
    GridSpec grid;
    double height_norm;
    nn::Graph<T> graph;

    static RotationClassifier make(Axis axis, int class_count, double step_deg, const GridSpec& grid,
                                   nn::PartChannels channels, uint64_t seed, double height_norm = 3.0);
    static RotationClassifier from_graph(Axis axis, int class_count, double step_deg,
                                         const GridSpec& grid, double height_norm, nn::Graph<T> graph);

    std::vector<double> angles_rad() const;

    /// Nearest grid class for a ground-truth angle; angles beyond the grid
    /// clamp to the extreme class and set *clamped.
    int label_for(double angle_rad, bool* clamped = nullptr) const;

    /// One network input per class: the current cloud rotated by the class
    /// angle, re-encoded, stacked with the previous frame. The per-class
    /// encodes run concurrently; results are assembled in grid order.
    std::vector<nn::Tensor<T>> make_inputs(const PointCloud& current, const EncodedFrame& previous) const;

    ClassProbabilities classify(const PointCloud& current, const EncodedFrame& previous) const;
};

template <class T>
struct Pipeline {
    double height_norm = 3.0;
    int window = 3;  // W
    RotationSource rotation_source = RotationSource::Classification;
    std::optional<RegressionModel<T>> translation;
    std::optional<RegressionModel<T>> rotation_regression;
    std::vector<RotationClassifier<T>> classifiers;

    void validate() const;
    int previous_frames() const;  // N of the regression models, 0 if none
};

/// Streams scans through a pipeline. The first N frames of a sequence
/// replicate the oldest available frame to fill the window, so one motion
/// comes out per frame after the first.
template <class T>
class SequenceEstimator {
public:
    explicit SequenceEstimator(const Pipeline<T>& pipe);

    /// First call stores the frame and returns nothing; every later call
    /// returns the motion from the previous frame to this one.
    std::optional<RigidMotion> push(const PointCloud& cloud);

private:
    const Pipeline<T>* pipe_;
    std::vector<EncodedFrame> window_;  // newest first
    std::unique_ptr<EncodedFrame> prev_cls_;
    bool first_ = true;
};

/// Model bundle directory: one weight file per network plus a plain-text
/// manifest (grid geometry, N, K per axis, W, height normalization) so the
/// bundle is self-describing.
template <class T>
void save_bundle(const Pipeline<T>& pipe, const std::string& dir);
template <class T>
Pipeline<T> load_bundle(const std::string& dir);

/// Precision recorded in a bundle manifest ("f32" or "f64").
std::string bundle_precision(const std::string& dir);

// ---------------------------------------------------------------------------
// Training.

struct EncodedSequence {
    std::vector<EncodedFrame> frames;
    std::vector<RigidMotion> motions;  // motions[k]: frame k -> k+1
};

struct ClassifierSequence {
    std::vector<PointCloud> clouds;
    std::vector<EncodedFrame> frames;
    std::vector<RigidMotion> motions;
};

EncodedSequence encode_sequence(const std::vector<PointCloud>& scans,
                                const std::vector<RigidMotion>& motions, const GridSpec& grid,
                                double height_norm);
ClassifierSequence make_classifier_sequence(std::vector<PointCloud> scans,
                                            const std::vector<RigidMotion>& motions,
                                            const GridSpec& grid, double height_norm);

struct TrainOptions {
    int iterations = 1000;
    int batch = 8;
    double lr = 1e-3;
    double momentum = 0.9;
    int lr_step = 0;  // iterations between decays, 0 = constant
    double lr_decay = 0.5;
    uint64_t seed = 1;
    std::ostream* log = nullptr;
};

/// SGD over windows drawn from the sequences; labels come from the stored
/// ground-truth motions. Returns the per-iteration loss log (iterations == 0
/// evaluates one batch without updating).
template <class T>
std::vector<double> train_regression(RegressionModel<T>& model,
                                     const std::vector<const EncodedSequence*>& data,
                                     const TrainOptions& opt);

/// Cross-entropy training of one axis classifier. Ground-truth angles snap
/// to the nearest class; out-of-grid angles clamp with a warning counter.
template <class T>
std::vector<double> train_classifier(RotationClassifier<T>& clf,
                                     const std::vector<const ClassifierSequence*>& data,
                                     const TrainOptions& opt);

extern template nn::Tensor<float> pair_tensor<float>(const EncodedFrame&, const EncodedFrame&);
extern template nn::Tensor<double> pair_tensor<double>(const EncodedFrame&, const EncodedFrame&);
extern template struct RegressionModel<float>;
extern template struct RegressionModel<double>;
extern template struct RotationClassifier<float>;
extern template struct RotationClassifier<double>;
extern template struct Pipeline<float>;
extern template struct Pipeline<double>;
extern template class SequenceEstimator<float>;
extern template class SequenceEstimator<double>;
extern template void save_bundle<float>(const Pipeline<float>&, const std::string&);
extern template void save_bundle<double>(const Pipeline<double>&, const std::string&);
extern template Pipeline<float> load_bundle<float>(const std::string&);
extern template Pipeline<double> load_bundle<double>(const std::string&);
extern template std::vector<double> train_regression<float>(RegressionModel<float>&, const std::vector<const EncodedSequence*>&, const TrainOptions&);
extern template std::vector<double> train_regression<double>(RegressionModel<double>&, const std::vector<const EncodedSequence*>&, const TrainOptions&);
extern template std::vector<double> train_classifier<float>(RotationClassifier<float>&, const std::vector<const ClassifierSequence*>&, const TrainOptions&);
extern template std::vector<double> train_classifier<double>(RotationClassifier<double>&, const std::vector<const ClassifierSequence*>&, const TrainOptions&);

}  // namespace odom
