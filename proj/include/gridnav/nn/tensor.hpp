#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gridnav/core.hpp"

namespace gridnav::nn {

struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense NCHW tensor.
template <class T>
class Tensor4 {
public:
    using value_type = T;

    Tensor4() = default;
    explicit Tensor4(Shape4 s, T fill = T(0)) : shape_(s), data_(s.count(), fill) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw Error("negative tensor dimension");
    }
    Tensor4(int n, int c, int h, int w, T fill = T(0)) : Tensor4(Shape4{n, c, h, w}, fill) {}

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& operator()(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
    T operator()(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    /// Pointer to the start of sample n.
    T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
    const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
    std::size_t sample_size() const {
        return static_cast<std::size_t>(shape_.c) * static_cast<std::size_t>(shape_.h) * static_cast<std::size_t>(shape_.w);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    Shape4 shape_{};
    std::vector<T> data_;
};

template <class T>
void require_finite(const Tensor4<T>& t, const char* where) {
    for (const T v : t.values())
        if (!std::isfinite(v)) throw Error(std::string("non-finite value in ") + where);
}

template <class T>
void add_inplace(Tensor4<T>& a, const Tensor4<T>& b) {
    if (!(a.shape() == b.shape())) throw Error("tensor shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

/// Channel-wise concatenation of two tensors with equal batch and spatial dims.
template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw Error("concat shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor4<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (int n = 0; n < a.n(); ++n) {
        std::copy_n(a.sample(n), a.sample_size(), out.sample(n));
        std::copy_n(b.sample(n), b.sample_size(), out.sample(n) + a.sample_size());
    }
    return out;
}

template <class T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& g, int first_channels) {
    Tensor4<T> a(g.n(), first_channels, g.h(), g.w());
    Tensor4<T> b(g.n(), g.c() - first_channels, g.h(), g.w());
    for (int n = 0; n < g.n(); ++n) {
        std::copy_n(g.sample(n), a.sample_size(), a.sample(n));
        std::copy_n(g.sample(n) + a.sample_size(), b.sample_size(), b.sample(n));
    }
    return {std::move(a), std::move(b)};
}

}  // namespace gridnav::nn
