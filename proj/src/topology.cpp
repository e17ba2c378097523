#include "odom/topology.hpp"

namespace odom::nn {

int append_cnn_part(GraphSpec& g, int input, const std::string& prefix, PartChannels ch, bool wide) {
    ConvDims c1;
    c1.in_c = 6;
    c1.out_c = ch.c1;
    if (wide) {
        c1.kh = 3; c1.kw = 15;
        c1.sh = 1; c1.sw = 5;
        c1.ph = 1; c1.pw = 5;
    } else {
        c1.kh = 3; c1.kw = 3;
        c1.sh = 1; c1.sw = 1;
        c1.ph = 1; c1.pw = 1;
    }
    int n = add_conv(g, prefix + ".conv1", input, c1);
    n = add_relu(g, n);
    n = add_maxpool(g, n);

    ConvDims c2;
    c2.in_c = ch.c1; c2.out_c = ch.c2;
    c2.kh = 3; c2.kw = 3; c2.sh = 1; c2.sw = 1; c2.ph = 1; c2.pw = 1;
    n = add_conv(g, prefix + ".conv2", n, c2);
    n = add_relu(g, n);
    n = add_maxpool(g, n);

    ConvDims c3;
    c3.in_c = ch.c2; c3.out_c = ch.c3;
    c3.kh = 3; c3.kw = 3; c3.sh = 1; c3.sw = 1; c3.ph = 1; c3.pw = 1;
    n = add_conv(g, prefix + ".conv3", n, c3);
    n = add_relu(g, n);
    n = add_maxpool(g, n);
    return n;
}

GraphSpec regression_graph(int rows, int cols, int pair_count, int outputs, PartChannels ch) {
    GraphSpec g;
    std::vector<int> features;
    for (int i = 0; i < pair_count; ++i) {
        const int in = add_input(g, {6, rows, cols});
        features.push_back(append_cnn_part(g, in, "part", ch, false));
    }
    const int joined = features.size() == 1 ? features[0] : add_concat(g, features);
    add_fc(g, "head.fc", joined, outputs);
    return g;
}

GraphSpec classifier_graph(int rows, int cols, int class_count, PartChannels ch) {
    GraphSpec g;
    std::vector<int> scores;
    for (int i = 0; i < class_count; ++i) {
        const int in = add_input(g, {6, rows, cols});
        const int feat = append_cnn_part(g, in, "part", ch, true);
        scores.push_back(add_fc(g, "score.fc", feat, 1));
    }
    const int joined = add_concat(g, scores);
    add_softmax(g, joined);
    return g;
}

GraphSpec cnn_part_graph(int rows, int cols, PartChannels ch, bool wide) {
    GraphSpec g;
    const int in = add_input(g, {6, rows, cols});
    append_cnn_part(g, in, "part", ch, wide);
    return g;
}

}  // namespace odom::nn
