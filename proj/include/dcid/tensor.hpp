#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dcid/errors.hpp"

namespace dcid {

/// Dense row-major tensor. Training instantiates float, gradient checks
/// instantiate double.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(numel_of(shape), fill);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ArgumentError("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[i]; }
    int rank() const { return static_cast<int>(shape.size()); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

}  // namespace dcid
