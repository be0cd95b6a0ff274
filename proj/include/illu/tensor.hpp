#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "illu/errors.hpp"

namespace illu {

// Dense N-dimensional array, row-major. Carrier of activations, weights and
// gradients. The invariant data.size() == product(shape) holds at all times.
template <class T>
class BasicTensor {
  public:
    BasicTensor() = default;

    explicit BasicTensor(std::vector<size_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_)) {}

    BasicTensor(std::vector<size_t> shape, std::vector<T> data) : shape_(std::move(shape)) {
        if (data.size() != checked_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_to_string(shape_));
        data_ = std::move(data);
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t i) const { return shape_[i]; }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    // accessors for the two layouts the network uses: [C,H,W] and [rows,cols]
    T& at(size_t c, size_t y, size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
    const T& at(size_t c, size_t y, size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    T& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    bool same_shape(const BasicTensor& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_str() const { return shape_to_string(shape_); }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

    static std::string shape_to_string(const std::vector<size_t>& s) {
        std::string out = "[";
        for (size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

  private:
    static size_t checked_numel(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t d : shape) {
            if (d == 0) throw ShapeError("tensor dimension of size 0 in " + shape_to_string(shape));
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<size_t> shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <class To, class From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
    BasicTensor<To> out(t.shape());
    for (size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
    return out;
}

// One-hot label vector of length num_classes.
template <class T = float>
BasicTensor<T> one_hot(size_t k, size_t num_classes) {
    if (k >= num_classes)
        throw ShapeError("one_hot index " + std::to_string(k) + " out of range for " +
                         std::to_string(num_classes) + " classes");
    BasicTensor<T> t({num_classes});
    t[k] = T(1);
    return t;
}

// Probability-vector invariant: entries in [0,1], summing to 1 within tol.
template <class T>
bool is_prob_vector(const BasicTensor<T>& t, double tol = 1e-5) {
    if (t.rank() != 1) return false;
    double sum = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        double v = t[i];
        if (!(v >= 0.0 && v <= 1.0)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

template <class T>
bool is_one_hot(const BasicTensor<T>& t) {
    if (t.rank() != 1) return false;
    size_t ones = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == T(1))
            ++ones;
        else if (t[i] != T(0))
            return false;
    }
    return ones == 1;
}

}  // namespace illu
