#include "odom/nn.hpp"

#include <cassert>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace odom::nn {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Softmax: return "softmax";
        case LayerKind::Concat: return "concat";
    }
    return "?";
}

namespace {

void check_name(const std::string& name) {
    if (name.empty()) throw UsageError("parameterized layers need a non-empty name");
    if (name.find(' ') != std::string::npos || name.find('\n') != std::string::npos) {
        throw UsageError("layer name must not contain whitespace: '" + name + "'");
    }
}

}  // namespace

int add_input(GraphSpec& g, Shape shape) {
    LayerSpec s;
    s.kind = LayerKind::Input;
    s.input_shape = std::move(shape);
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_conv(GraphSpec& g, std::string name, int input, ConvDims dims) {
    check_name(name);
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.name = std::move(name);
    s.inputs = {input};
    s.conv = dims;
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_relu(GraphSpec& g, int input) {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    s.inputs = {input};
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_maxpool(GraphSpec& g, int input) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    s.inputs = {input};
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_fc(GraphSpec& g, std::string name, int input, int out, int in) {
    check_name(name);
    LayerSpec s;
    s.kind = LayerKind::FullyConnected;
    s.name = std::move(name);
    s.inputs = {input};
    s.fc_in = in;
    s.fc_out = out;
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_softmax(GraphSpec& g, int input) {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    s.inputs = {input};
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

int add_concat(GraphSpec& g, std::vector<int> inputs) {
    LayerSpec s;
    s.kind = LayerKind::Concat;
    s.inputs = std::move(inputs);
    g.nodes.push_back(std::move(s));
    return static_cast<int>(g.nodes.size()) - 1;
}

std::string layer_descriptor(const LayerSpec& s) {
    std::ostringstream out;
    out << kind_name(s.kind);
    switch (s.kind) {
        case LayerKind::Input:
            out << " shape=" << shape_str(s.input_shape);
            break;
        case LayerKind::Conv2d:
            out << " name=" << s.name << " input=" << s.inputs[0] << " in=" << s.conv.in_c
                << " out=" << s.conv.out_c << " kh=" << s.conv.kh << " kw=" << s.conv.kw
                << " sh=" << s.conv.sh << " sw=" << s.conv.sw << " ph=" << s.conv.ph
                << " pw=" << s.conv.pw;
            break;
        case LayerKind::Relu:
        case LayerKind::MaxPool:
        case LayerKind::Softmax:
            out << " input=" << s.inputs[0];
            break;
        case LayerKind::FullyConnected:
            out << " name=" << s.name << " input=" << s.inputs[0] << " in=" << s.fc_in
                << " out=" << s.fc_out;
            break;
        case LayerKind::Concat: {
            out << " inputs=";
            for (size_t i = 0; i < s.inputs.size(); ++i) {
                if (i) out << ",";
                out << s.inputs[i];
            }
            break;
        }
    }
    return out.str();
}

namespace {

std::map<std::string, std::string> parse_kv(std::istringstream& in, const std::string& line) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok) {
        const size_t eq = tok.find('=');
        if (eq == std::string::npos) {
            throw IncompatibleWeightsError("bad layer descriptor token '" + tok + "' in: " + line);
        }
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& line) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IncompatibleWeightsError("missing '" + key + "' in layer descriptor: " + line);
    return std::stoi(it->second);
}

std::string kv_str(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& line) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IncompatibleWeightsError("missing '" + key + "' in layer descriptor: " + line);
    return it->second;
}

}  // namespace

LayerSpec parse_layer_descriptor(const std::string& line) {
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    LayerSpec s;
    auto kv = parse_kv(in, line);
    if (kind == "input") {
        s.kind = LayerKind::Input;
        std::string dims = kv_str(kv, "shape", line);
        size_t pos = 0;
        while (pos < dims.size()) {
            size_t x = dims.find('x', pos);
            if (x == std::string::npos) x = dims.size();
            s.input_shape.push_back(std::stoi(dims.substr(pos, x - pos)));
            pos = x + 1;
        }
    } else if (kind == "conv2d") {
        s.kind = LayerKind::Conv2d;
        s.name = kv_str(kv, "name", line);
        s.inputs = {kv_int(kv, "input", line)};
        s.conv.in_c = kv_int(kv, "in", line);
        s.conv.out_c = kv_int(kv, "out", line);
        s.conv.kh = kv_int(kv, "kh", line);
        s.conv.kw = kv_int(kv, "kw", line);
        s.conv.sh = kv_int(kv, "sh", line);
        s.conv.sw = kv_int(kv, "sw", line);
        s.conv.ph = kv_int(kv, "ph", line);
        s.conv.pw = kv_int(kv, "pw", line);
    } else if (kind == "relu" || kind == "maxpool" || kind == "softmax") {
        s.kind = kind == "relu" ? LayerKind::Relu
                                : (kind == "maxpool" ? LayerKind::MaxPool : LayerKind::Softmax);
        s.inputs = {kv_int(kv, "input", line)};
    } else if (kind == "fc") {
        s.kind = LayerKind::FullyConnected;
        s.name = kv_str(kv, "name", line);
        s.inputs = {kv_int(kv, "input", line)};
        s.fc_in = kv_int(kv, "in", line);
        s.fc_out = kv_int(kv, "out", line);
    } else if (kind == "concat") {
        s.kind = LayerKind::Concat;
        std::string ids = kv_str(kv, "inputs", line);
        size_t pos = 0;
        while (pos < ids.size()) {
            size_t comma = ids.find(',', pos);
            if (comma == std::string::npos) comma = ids.size();
            s.inputs.push_back(std::stoi(ids.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    } else {
        throw IncompatibleWeightsError("unknown layer kind '" + kind + "'");
    }
    return s;
}

template <class T>
std::string Graph<T>::node_label(int id) const {
    const LayerSpec& s = spec_.nodes[id];
    std::string out = kind_name(s.kind);
    if (!s.name.empty()) out += " '" + s.name + "'";
    out += " (node " + std::to_string(id) + ")";
    return out;
}

template <class T>
Graph<T>::Graph(GraphSpec spec) : spec_(std::move(spec)) {
    if (spec_.nodes.empty()) throw UsageError("graph has no nodes");
    for (int id = 0; id < static_cast<int>(spec_.nodes.size()); ++id) {
        const LayerSpec& s = spec_.nodes[id];
        if (s.kind == LayerKind::Input) {
            input_ids_.push_back(id);
            continue;
        }
        if (s.inputs.empty()) throw UsageError(node_label(id) + ": no inputs");
        for (int in : s.inputs) {
            if (in < 0 || in >= id) throw UsageError(node_label(id) + ": bad input id " + std::to_string(in));
        }
    }
    if (input_ids_.empty()) throw UsageError("graph has no input nodes");
    infer_shapes();

    // Allocate parameter buffers; shared names must agree on geometry.
    for (const LayerSpec& s : spec_.nodes) {
        if (s.kind == LayerKind::Conv2d) {
            Param<T> p;
            p.w.assign(static_cast<size_t>(s.conv.out_c) * s.conv.in_c * s.conv.kh * s.conv.kw, T(0));
            p.b.assign(static_cast<size_t>(s.conv.out_c), T(0));
            auto [it, inserted] = params_.try_emplace(s.name, std::move(p));
            if (!inserted && (it->second.w.size() != static_cast<size_t>(s.conv.out_c) * s.conv.in_c * s.conv.kh * s.conv.kw ||
                              it->second.b.size() != static_cast<size_t>(s.conv.out_c))) {
                throw ShapeError("shared parameter '" + s.name + "' used with mismatched conv geometry");
            }
        } else if (s.kind == LayerKind::FullyConnected) {
            Param<T> p;
            p.w.assign(static_cast<size_t>(s.fc_out) * s.fc_in, T(0));
            p.b.assign(static_cast<size_t>(s.fc_out), T(0));
            auto [it, inserted] = params_.try_emplace(s.name, std::move(p));
            if (!inserted && (it->second.w.size() != static_cast<size_t>(s.fc_out) * s.fc_in ||
                              it->second.b.size() != static_cast<size_t>(s.fc_out))) {
                throw ShapeError("shared parameter '" + s.name + "' used with mismatched fc geometry");
            }
        }
    }
}

template <class T>
void Graph<T>::infer_shapes() {
    shapes_.resize(spec_.nodes.size());
    for (int id = 0; id < static_cast<int>(spec_.nodes.size()); ++id) {
        LayerSpec& s = spec_.nodes[id];
        switch (s.kind) {
            case LayerKind::Input: {
                if (s.input_shape.empty() || numel(s.input_shape) <= 0) {
                    throw ShapeError(node_label(id) + ": bad input shape " + shape_str(s.input_shape));
                }
                shapes_[id] = s.input_shape;
                break;
            }
            case LayerKind::Conv2d: {
                const Shape& in = shapes_[s.inputs[0]];
                if (in.size() != 3) throw ShapeError(node_label(id) + ": expects a CHW input, got " + shape_str(in));
                if (in[0] != s.conv.in_c) {
                    throw ShapeError(node_label(id) + ": input has " + std::to_string(in[0]) +
                                     " channels, layer expects " + std::to_string(s.conv.in_c));
                }
                const int oh = conv_out_dim(in[1], s.conv.kh, s.conv.sh, s.conv.ph);
                const int ow = conv_out_dim(in[2], s.conv.kw, s.conv.sw, s.conv.pw);
                if (oh < 1 || ow < 1) throw ShapeError(node_label(id) + ": kernel larger than padded input");
                shapes_[id] = {s.conv.out_c, oh, ow};
                break;
            }
            case LayerKind::Relu:
                shapes_[id] = shapes_[s.inputs[0]];
                break;
            case LayerKind::MaxPool: {
                const Shape& in = shapes_[s.inputs[0]];
                if (in.size() != 3 || in[1] < 2 || in[2] < 2) {
                    throw ShapeError(node_label(id) + ": needs a CHW input at least 2x2, got " + shape_str(in));
                }
                shapes_[id] = {in[0], (in[1] - 2) / 2 + 1, (in[2] - 2) / 2 + 1};
                break;
            }
            case LayerKind::FullyConnected: {
                const long long n = numel(shapes_[s.inputs[0]]);
                if (s.fc_in == 0) s.fc_in = static_cast<int>(n);
                if (s.fc_in != n) {
                    throw ShapeError(node_label(id) + ": input has " + std::to_string(n) +
                                     " values, layer expects " + std::to_string(s.fc_in));
                }
                if (s.fc_out < 1) throw ShapeError(node_label(id) + ": output size must be positive");
                shapes_[id] = {s.fc_out};
                break;
            }
            case LayerKind::Softmax: {
                const Shape& in = shapes_[s.inputs[0]];
                if (in.size() != 1) throw ShapeError(node_label(id) + ": expects a vector input, got " + shape_str(in));
                shapes_[id] = in;
                break;
            }
            case LayerKind::Concat: {
                long long total = 0;
                for (int in : s.inputs) total += numel(shapes_[in]);
                shapes_[id] = {static_cast<int>(total)};
                break;
            }
        }
    }
}

template <class T>
long long Graph<T>::param_count() const {
    long long n = 0;
    for (const auto& [key, p] : params_) n += static_cast<long long>(p.w.size() + p.b.size());
    return n;
}

template <class T>
void Graph<T>::init_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& [key, p] : params_) {
        long long fan_in = 0;
        for (const LayerSpec& s : spec_.nodes) {
            if (s.name != key) continue;
            fan_in = s.kind == LayerKind::Conv2d ? static_cast<long long>(s.conv.in_c) * s.conv.kh * s.conv.kw
                                                 : s.fc_in;
            break;
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (T& v : p.w) v = static_cast<T>(dist(rng));
        for (T& v : p.b) v = T(0);
    }
}

template <class T>
void Graph<T>::check_inputs(const std::vector<Tensor<T>>& inputs) const {
    if (inputs.size() != input_ids_.size()) {
        throw ShapeError("graph expects " + std::to_string(input_ids_.size()) + " inputs, got " +
                         std::to_string(inputs.size()));
    }
    for (size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].shape != shapes_[input_ids_[i]]) {
            throw ShapeError("graph input " + std::to_string(i) + " has shape " + shape_str(inputs[i].shape) +
                             ", expected " + shape_str(shapes_[input_ids_[i]]));
        }
    }
}

template <class T>
void Graph<T>::run_node(int id, std::vector<Tensor<T>>& value,
                        std::vector<std::vector<int32_t>>* argmax) const {
    const LayerSpec& s = spec_.nodes[id];
    Tensor<T> out(shapes_[id]);
    switch (s.kind) {
        case LayerKind::Input:
            return;  // already materialized
        case LayerKind::Conv2d: {
            const Tensor<T>& x = value[s.inputs[0]];
            const Param<T>& p = params_.at(s.name);
            conv2d_forward(x.data.data(), x.shape[0], x.shape[1], x.shape[2], s.conv,
                           p.w.data(), p.b.data(), out.data.data());
            break;
        }
        case LayerKind::Relu: {
            const Tensor<T>& x = value[s.inputs[0]];
            relu_forward(x.data.data(), x.size(), out.data.data());
            break;
        }
        case LayerKind::MaxPool: {
            const Tensor<T>& x = value[s.inputs[0]];
            std::vector<int32_t> arg(out.data.size());
            maxpool_forward(x.data.data(), x.shape[0], x.shape[1], x.shape[2], out.data.data(), arg.data());
            if (argmax) (*argmax)[id] = std::move(arg);
            break;
        }
        case LayerKind::FullyConnected: {
            const Tensor<T>& x = value[s.inputs[0]];
            const Param<T>& p = params_.at(s.name);
            fc_forward(x.data.data(), s.fc_in, s.fc_out, p.w.data(), p.b.data(), out.data.data());
            break;
        }
        case LayerKind::Softmax: {
            const Tensor<T>& x = value[s.inputs[0]];
            softmax_forward(x.data.data(), static_cast<int>(x.size()), out.data.data());
            break;
        }
        case LayerKind::Concat: {
            size_t off = 0;
            for (int in : s.inputs) {
                const Tensor<T>& x = value[in];
                std::memcpy(out.data.data() + off, x.data.data(), x.data.size() * sizeof(T));
                off += x.data.size();
            }
            break;
        }
    }
    assert(out.all_finite() && "non-finite activation");
    value[id] = std::move(out);
}

template <class T>
Tensor<T> Graph<T>::forward(const std::vector<Tensor<T>>& inputs) const {
    check_inputs(inputs);
    const int n = static_cast<int>(spec_.nodes.size());
    std::vector<int> pending(n, 0);
    for (const LayerSpec& s : spec_.nodes) {
        for (int in : s.inputs) pending[in] += 1;
    }
    std::vector<Tensor<T>> value(n);
    for (size_t i = 0; i < input_ids_.size(); ++i) value[input_ids_[i]] = inputs[i];
    for (int id = 0; id < n; ++id) {
        run_node(id, value, nullptr);
        for (int in : spec_.nodes[id].inputs) {
            if (--pending[in] == 0) {
                value[in].data.clear();
                value[in].data.shrink_to_fit();
            }
        }
    }
    return std::move(value.back());
}

template <class T>
Cache<T> Graph<T>::forward_cached(const std::vector<Tensor<T>>& inputs) const {
    check_inputs(inputs);
    Cache<T> cache;
    cache.value.resize(spec_.nodes.size());
    cache.argmax.resize(spec_.nodes.size());
    for (size_t i = 0; i < input_ids_.size(); ++i) cache.value[input_ids_[i]] = inputs[i];
    for (int id = 0; id < static_cast<int>(spec_.nodes.size()); ++id) {
        run_node(id, cache.value, &cache.argmax);
    }
    return cache;
}

template <class T>
ParamMap<T> Graph<T>::zero_grads() const {
    ParamMap<T> grads;
    for (const auto& [key, p] : params_) {
        Param<T> zero;
        zero.w.assign(p.w.size(), T(0));
        zero.b.assign(p.b.size(), T(0));
        grads.emplace(key, std::move(zero));
    }
    return grads;
}

template <class T>
ParamMap<T> Graph<T>::backward(const Cache<T>& cache, const Tensor<T>& output_grad) const {
    const int n = static_cast<int>(spec_.nodes.size());
    if (static_cast<int>(cache.value.size()) != n || cache.value.back().data.empty()) {
        throw UsageError("backward: missing forward cache (run forward_cached first)");
    }
    if (output_grad.shape != shapes_.back()) {
        throw ShapeError("backward: output gradient shape " + shape_str(output_grad.shape) +
                         " does not match " + shape_str(shapes_.back()));
    }
    ParamMap<T> grads = zero_grads();
    std::vector<Tensor<T>> gvalue(n);
    gvalue[n - 1] = output_grad;
    for (int id = n - 1; id >= 0; --id) {
        const LayerSpec& s = spec_.nodes[id];
        if (s.kind == LayerKind::Input) continue;
        if (gvalue[id].data.empty()) continue;  // node does not feed the output
        const Tensor<T>& gy = gvalue[id];
        for (int in : s.inputs) {
            if (gvalue[in].data.empty()) gvalue[in] = Tensor<T>(shapes_[in]);
        }
        switch (s.kind) {
            case LayerKind::Conv2d: {
                const Tensor<T>& x = cache.value[s.inputs[0]];
                Param<T>& gp = grads.at(s.name);
                const Param<T>& p = params_.at(s.name);
                conv2d_backward_params(x.data.data(), x.shape[0], x.shape[1], x.shape[2], s.conv,
                                       gy.data.data(), gp.w.data(), gp.b.data());
                conv2d_backward_input(p.w.data(), s.conv, x.shape[0], x.shape[1], x.shape[2],
                                      gy.data.data(), gvalue[s.inputs[0]].data.data());
                break;
            }
            case LayerKind::Relu: {
                const Tensor<T>& x = cache.value[s.inputs[0]];
                relu_backward(x.data.data(), x.size(), gy.data.data(), gvalue[s.inputs[0]].data.data());
                break;
            }
            case LayerKind::MaxPool: {
                const Tensor<T>& x = cache.value[s.inputs[0]];
                maxpool_backward(cache.argmax[id].data(), x.shape[0], x.shape[1], x.shape[2],
                                 gy.data.data(), gvalue[s.inputs[0]].data.data());
                break;
            }
            case LayerKind::FullyConnected: {
                const Tensor<T>& x = cache.value[s.inputs[0]];
                Param<T>& gp = grads.at(s.name);
                const Param<T>& p = params_.at(s.name);
                fc_backward(x.data.data(), s.fc_in, s.fc_out, p.w.data(), gy.data.data(),
                            gp.w.data(), gp.b.data(), gvalue[s.inputs[0]].data.data());
                break;
            }
            case LayerKind::Softmax: {
                const Tensor<T>& y = cache.value[id];
                softmax_backward(y.data.data(), static_cast<int>(y.size()), gy.data.data(),
                                 gvalue[s.inputs[0]].data.data());
                break;
            }
            case LayerKind::Concat: {
                size_t off = 0;
                for (int in : s.inputs) {
                    Tensor<T>& gin = gvalue[in];
                    for (size_t i = 0; i < gin.data.size(); ++i) gin.data[i] += gy.data[off + i];
                    off += gin.data.size();
                }
                break;
            }
            case LayerKind::Input:
                break;
        }
        gvalue[id].data.clear();
        gvalue[id].data.shrink_to_fit();
    }
    return grads;
}

template <class T>
void SgdOptimizer<T>::step(Graph<T>& g, const ParamMap<T>& grads) {
    if (velocity_.empty()) velocity_ = g.zero_grads();
    const T lr = static_cast<T>(lr_);
    const T mu = static_cast<T>(momentum_);
    for (auto& [key, p] : g.params()) {
        const Param<T>& gp = grads.at(key);
        Param<T>& v = velocity_.at(key);
        for (size_t i = 0; i < p.w.size(); ++i) {
            v.w[i] = mu * v.w[i] - lr * gp.w[i];
            p.w[i] += v.w[i];
        }
        for (size_t i = 0; i < p.b.size(); ++i) {
            v.b[i] = mu * v.b[i] - lr * gp.b[i];
            p.b[i] += v.b[i];
        }
    }
}

namespace {

template <class T>
double loss_and_grad(LossKind loss, const Tensor<T>& y, const Sample<T>& sample, Tensor<T>& gy) {
    if (loss == LossKind::Mse) {
        if (sample.target.size() != y.data.size()) {
            throw ShapeError("mse: target has " + std::to_string(sample.target.size()) +
                             " values, output has " + std::to_string(y.data.size()));
        }
        const double inv = 1.0 / static_cast<double>(y.data.size());
        double acc = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) {
            const double d = static_cast<double>(y.data[i]) - static_cast<double>(sample.target[i]);
            acc += d * d;
            gy.data[i] = static_cast<T>(2.0 * d * inv);
        }
        return acc * inv;
    }
    if (sample.label < 0 || sample.label >= static_cast<int>(y.data.size())) {
        throw UsageError("cross_entropy: label " + std::to_string(sample.label) + " outside output range");
    }
    const double p = static_cast<double>(y.data[sample.label]);
    gy.data[sample.label] = static_cast<T>(-1.0 / p);
    return -std::log(p);
}

}  // namespace

template <class T>
T train_step(Graph<T>& g, const std::vector<Sample<T>>& batch, LossKind loss, SgdOptimizer<T>& opt) {
    if (batch.empty()) throw UsageError("train_step: empty batch");
    const int B = static_cast<int>(batch.size());
    std::vector<ParamMap<T>> grads(static_cast<size_t>(B));
    std::vector<double> losses(static_cast<size_t>(B), 0.0);
    std::exception_ptr eptr = nullptr;

#pragma omp parallel for schedule(dynamic) if (B > 1)
    for (int i = 0; i < B; ++i) {
        try {
            Cache<T> cache = g.forward_cached(batch[i].inputs);
            const Tensor<T>& y = g.output(cache);
            Tensor<T> gy(y.shape);
            losses[i] = loss_and_grad(loss, y, batch[i], gy);
            grads[i] = g.backward(cache, gy);
        } catch (...) {
#pragma omp critical
            if (!eptr) eptr = std::current_exception();
        }
    }
    if (eptr) std::rethrow_exception(eptr);

    // Reduce in sample order, then average.
    ParamMap<T> total = g.zero_grads();
    const T inv = static_cast<T>(1.0 / B);
    for (int i = 0; i < B; ++i) {
        for (auto& [key, acc] : total) {
            const Param<T>& gp = grads[static_cast<size_t>(i)].at(key);
            for (size_t k = 0; k < acc.w.size(); ++k) acc.w[k] += gp.w[k];
            for (size_t k = 0; k < acc.b.size(); ++k) acc.b[k] += gp.b[k];
        }
    }
    for (auto& [key, acc] : total) {
        for (T& v : acc.w) v *= inv;
        for (T& v : acc.b) v *= inv;
    }

    double mean_loss = 0.0;
    for (double l : losses) mean_loss += l;
    mean_loss /= B;
    if (!std::isfinite(mean_loss)) {
        throw DivergenceError("train_step: non-finite batch loss " + std::to_string(mean_loss));
    }
    opt.step(g, total);
    return static_cast<T>(mean_loss);
}

namespace {

constexpr uint32_t kWeightsVersion = 1;

template <typename V>
void write_raw(std::ostream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_raw(std::istream& in) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!in) throw IncompatibleWeightsError("weight stream truncated");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint32_t len = read_raw<uint32_t>(in);
    if (len > (1u << 20)) throw IncompatibleWeightsError("weight stream: implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw IncompatibleWeightsError("weight stream truncated");
    return s;
}

/// Parameter keys in first-use order over the node list.
std::vector<std::string> param_order(const GraphSpec& spec) {
    std::vector<std::string> order;
    for (const LayerSpec& s : spec.nodes) {
        if (s.kind != LayerKind::Conv2d && s.kind != LayerKind::FullyConnected) continue;
        bool seen = false;
        for (const std::string& k : order) {
            if (k == s.name) { seen = true; break; }
        }
        if (!seen) order.push_back(s.name);
    }
    return order;
}

}  // namespace

template <class T>
void save_weights(const Graph<T>& g, std::ostream& out) {
    out.write("ODNW", 4);
    write_raw<uint32_t>(out, kWeightsVersion);
    write_raw<uint32_t>(out, static_cast<uint32_t>(g.spec().nodes.size()));
    for (const LayerSpec& s : g.spec().nodes) write_string(out, layer_descriptor(s));
    const std::vector<std::string> order = param_order(g.spec());
    write_raw<uint32_t>(out, static_cast<uint32_t>(order.size()));
    for (const std::string& key : order) {
        const Param<T>& p = g.params().at(key);
        write_string(out, key);
        write_raw<uint64_t>(out, static_cast<uint64_t>(p.w.size()));
        write_raw<uint64_t>(out, static_cast<uint64_t>(p.b.size()));
        for (T v : p.w) write_raw<float>(out, static_cast<float>(v));
        for (T v : p.b) write_raw<float>(out, static_cast<float>(v));
    }
    if (!out) throw DataError("save_weights: stream write failed");
}

template <class T>
Graph<T> load_weights(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "ODNW", 4) != 0) {
        throw IncompatibleWeightsError("weight stream: bad magic");
    }
    const uint32_t version = read_raw<uint32_t>(in);
    if (version != kWeightsVersion) {
        throw IncompatibleWeightsError("weight stream: unsupported version " + std::to_string(version));
    }
    const uint32_t node_count = read_raw<uint32_t>(in);
    GraphSpec spec;
    for (uint32_t i = 0; i < node_count; ++i) {
        spec.nodes.push_back(parse_layer_descriptor(read_string(in)));
    }
    Graph<T> g(spec);
    const uint32_t param_count = read_raw<uint32_t>(in);
    const std::vector<std::string> order = param_order(spec);
    if (param_count != order.size()) {
        throw IncompatibleWeightsError("weight stream: parameter count does not match topology");
    }
    for (uint32_t i = 0; i < param_count; ++i) {
        const std::string key = read_string(in);
        if (key != order[i]) {
            throw IncompatibleWeightsError("weight stream: parameter '" + key + "' out of order");
        }
        Param<T>& p = g.params().at(key);
        const uint64_t wn = read_raw<uint64_t>(in);
        const uint64_t bn = read_raw<uint64_t>(in);
        if (wn != p.w.size() || bn != p.b.size()) {
            throw IncompatibleWeightsError("weight stream: parameter '" + key + "' has wrong size");
        }
        for (uint64_t k = 0; k < wn; ++k) p.w[k] = static_cast<T>(read_raw<float>(in));
        for (uint64_t k = 0; k < bn; ++k) p.b[k] = static_cast<T>(read_raw<float>(in));
    }
    return g;
}

template <class T>
void save_weights_file(const Graph<T>& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_weights_file: cannot open " + path);
    save_weights(g, out);
}

template <class T>
Graph<T> load_weights_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_weights_file: cannot open " + path);
    return load_weights<T>(in);
}

template class Graph<float>;
template class Graph<double>;
template class SgdOptimizer<float>;
template class SgdOptimizer<double>;
template float train_step<float>(Graph<float>&, const std::vector<Sample<float>>&, LossKind, SgdOptimizer<float>&);
template double train_step<double>(Graph<double>&, const std::vector<Sample<double>>&, LossKind, SgdOptimizer<double>&);
template void save_weights<float>(const Graph<float>&, std::ostream&);
template void save_weights<double>(const Graph<double>&, std::ostream&);
template Graph<float> load_weights<float>(std::istream&);
template Graph<double> load_weights<double>(std::istream&);
template void save_weights_file<float>(const Graph<float>&, const std::string&);
template void save_weights_file<double>(const Graph<double>&, const std::string&);
template Graph<float> load_weights_file<float>(const std::string&);
template Graph<double> load_weights_file<double>(const std::string&);

}  // namespace odom::nn
