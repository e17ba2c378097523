#pragma once

#include <string>

#include "odom/nn.hpp"

namespace odom::nn {

/// Channel progression of the three conv stages of a CNN part. The stock
/// networks use 16/32/64; desk-scale experiments shrink this.
struct PartChannels {
    int c1 = 16, c2 = 32, c3 = 64;
};

/// Appends the shared "CNN part" (three conv+relu+pool stages) reading from
/// `input` (a 6 x rows x cols frame pair). `wide` selects the classification
/// variant whose first convolution is 3x15 with horizontal stride 5.
/// Weights are keyed by `prefix` so all branches of a siamese net share.
/// Returns the id of the final pooled feature node.
int append_cnn_part(GraphSpec& g, int input, const std::string& prefix, PartChannels ch, bool wide);

/// Siamese regression net: N frame-pair inputs through one shared CNN part,
/// concatenated features, one fully connected layer to `outputs` values.
GraphSpec regression_graph(int rows, int cols, int pair_count, int outputs, PartChannels ch = {});

/// Rotation-classification comparator: K frame-pair inputs (one per sampled
/// rotation) through a shared wide CNN part and a shared single-score FC,
/// concatenated to a K-vector, softmax across the classes.
GraphSpec classifier_graph(int rows, int cols, int class_count, PartChannels ch = {});

/// Plain CNN part as a standalone graph (used by shape checks and tooling).
GraphSpec cnn_part_graph(int rows, int cols, PartChannels ch = {}, bool wide = false);

}  // namespace odom::nn
