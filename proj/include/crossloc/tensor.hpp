#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace crossloc {

// Dense NCHW tensor.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    static Tensor scalar(T val) {
        Tensor t(1, 1, 1, 1);
        t.v[0] = val;
        return t;
    }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    T& at(int ni, int ci, int yi, int xi) {
        return v[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
    }
    T at(int ni, int ci, int yi, int xi) const {
        return v[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
    }

    bool finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> o(n, c, h, w);
        for (std::size_t i = 0; i < v.size(); ++i) o.v[i] = static_cast<U>(v[i]);
        return o;
    }
};

}  // namespace crossloc
