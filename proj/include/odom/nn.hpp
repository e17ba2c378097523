#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "odom/error.hpp"
#include "odom/kernels.hpp"
#include "odom/tensor.hpp"

namespace odom::nn {

enum class LayerKind { Input, Conv2d, Relu, MaxPool, FullyConnected, Softmax, Concat };

const char* kind_name(LayerKind k);

/// One graph node. Conv2d and FullyConnected nodes carry a parameter key in
/// `name`; nodes sharing a key share one parameter buffer, and gradient
/// contributions from every sharing position accumulate into it.
struct LayerSpec {
    LayerKind kind = LayerKind::Input;
    std::string name;
    std::vector<int> inputs;
    Shape input_shape;  // Input nodes
    ConvDims conv;      // Conv2d nodes
    int fc_in = 0;      // FullyConnected nodes; 0 = inferred at build
    int fc_out = 0;
};

struct GraphSpec {
    std::vector<LayerSpec> nodes;
};

int add_input(GraphSpec& g, Shape shape);
int add_conv(GraphSpec& g, std::string name, int input, ConvDims dims);
int add_relu(GraphSpec& g, int input);
int add_maxpool(GraphSpec& g, int input);
int add_fc(GraphSpec& g, std::string name, int input, int out, int in = 0);
int add_softmax(GraphSpec& g, int input);
int add_concat(GraphSpec& g, std::vector<int> inputs);

/// Textual node descriptor used in weight streams. Round-trips exactly.
std::string layer_descriptor(const LayerSpec& spec);
LayerSpec parse_layer_descriptor(const std::string& line);

template <class T>
struct Param {
    std::vector<T> w, b;
};

template <class T>
using ParamMap = std::map<std::string, Param<T>>;

/// Forward activations retained for backpropagation.
template <class T>
struct Cache {
    std::vector<Tensor<T>> value;
    std::vector<std::vector<int32_t>> argmax;  // per MaxPool node
};

template <class T>
class Graph {
public:
    explicit Graph(GraphSpec spec);

    /// He-style uniform fan-in initialization; biases zero. Deterministic in
    /// the seed and independent of T (draws happen in double).
    void init_params(uint64_t seed);

    int input_count() const { return static_cast<int>(input_ids_.size()); }
    const Shape& input_shape(int i) const { return shapes_[input_ids_[i]]; }
    const Shape& output_shape() const { return shapes_.back(); }
    const Shape& node_shape(int id) const { return shapes_[id]; }
    const GraphSpec& spec() const { return spec_; }
    ParamMap<T>& params() { return params_; }
    const ParamMap<T>& params() const { return params_; }
    long long param_count() const;

    /// Inference forward. Intermediate values are released as soon as their
    /// consumers ran. Safe for concurrent callers on a frozen graph.
    Tensor<T> forward(const std::vector<Tensor<T>>& inputs) const;

    /// Training forward: keeps every node value.
    Cache<T> forward_cached(const std::vector<Tensor<T>>& inputs) const;

    const Tensor<T>& output(const Cache<T>& cache) const { return cache.value.back(); }

    /// Gradients of every parameter given d(loss)/d(output). Shared
    /// parameters receive summed contributions.
    ParamMap<T> backward(const Cache<T>& cache, const Tensor<T>& output_grad) const;

    ParamMap<T> zero_grads() const;

private:
    void infer_shapes();
    void check_inputs(const std::vector<Tensor<T>>& inputs) const;
    void run_node(int id, std::vector<Tensor<T>>& value, std::vector<std::vector<int32_t>>* argmax) const;
    std::string node_label(int id) const;

    GraphSpec spec_;
    std::vector<int> input_ids_;
    std::vector<Shape> shapes_;
    ParamMap<T> params_;
};

enum class LossKind { Mse, CrossEntropy };

template <class T>
struct Sample {
    std::vector<Tensor<T>> inputs;
    std::vector<T> target;  // Mse
    int label = -1;         // CrossEntropy
};

template <class T>
class SgdOptimizer {
public:
    SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    void step(Graph<T>& g, const ParamMap<T>& grads);

private:
    double lr_;
    double momentum_;
    ParamMap<T> velocity_;
};

/// One SGD step on a batch. Per-sample gradients may be computed in
/// parallel; they are reduced in sample order, so the result does not
/// depend on the thread count. Returns the pre-update batch mean loss;
/// throws DivergenceError (before updating) if it is not finite.
template <class T>
T train_step(Graph<T>& g, const std::vector<Sample<T>>& batch, LossKind loss, SgdOptimizer<T>& opt);

/// Weight stream: "ODNW" magic, u32 format version, length-prefixed node
/// descriptors, then unique parameter buffers in first-use order as
/// little-endian float32. Bit-exact in float mode.
template <class T>
void save_weights(const Graph<T>& g, std::ostream& out);
template <class T>
Graph<T> load_weights(std::istream& in);
template <class T>
void save_weights_file(const Graph<T>& g, const std::string& path);
template <class T>
Graph<T> load_weights_file(const std::string& path);

extern template class Graph<float>;
extern template class Graph<double>;
extern template class SgdOptimizer<float>;
extern template class SgdOptimizer<double>;
extern template float train_step<float>(Graph<float>&, const std::vector<Sample<float>>&, LossKind, SgdOptimizer<float>&);
extern template double train_step<double>(Graph<double>&, const std::vector<Sample<double>>&, LossKind, SgdOptimizer<double>&);
extern template void save_weights<float>(const Graph<float>&, std::ostream&);
extern template void save_weights<double>(const Graph<double>&, std::ostream&);
extern template Graph<float> load_weights<float>(std::istream&);
extern template Graph<double> load_weights<double>(std::istream&);
extern template void save_weights_file<float>(const Graph<float>&, const std::string&);
extern template void save_weights_file<double>(const Graph<double>&, const std::string&);
extern template Graph<float> load_weights_file<float>(const std::string&);
extern template Graph<double> load_weights_file<double>(const std::string&);

}  // namespace odom::nn
