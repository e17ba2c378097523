#pragma once

#include <cassert>
#include <cmath>
#include <string>
#include <vector>

namespace odom::nn {

/// Tensor shape: (channels, height, width) for feature maps, (n) for vectors.
using Shape = std::vector<int>;

inline long long numel(const Shape& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out.empty() ? "scalar" : out;
}

/// Dense n-d array, contiguous row-major.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), T(0)) {}

    long long size() const { return static_cast<long long>(data.size()); }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

}  // namespace odom::nn
