#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (nested loops, dense QP) so they share no code path
// with the library implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "illu/rng.hpp"
#include "illu/tensor.hpp"

namespace oracle {

// Direct 6-nested-loop convolution, 3x3, stride 1, pad 1.
template <class T>
illu::BasicTensor<T> conv2d_direct(const illu::BasicTensor<T>& in, const illu::BasicTensor<T>& w,
                                   const illu::BasicTensor<T>& b) {
    const int C = (int)in.dim(0), H = (int)in.dim(1), W = (int)in.dim(2), F = (int)w.dim(0);
    illu::BasicTensor<T> out({(size_t)F, (size_t)H, (size_t)W});
    for (int f = 0; f < F; ++f)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = b[f];
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int iy = y + ky - 1, ix = x + kx - 1;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += (double)w[((size_t)(f * C + c) * 3 + ky) * 3 + kx] *
                                   (double)in[((size_t)c * H + iy) * W + ix];
                        }
                out[((size_t)f * H + y) * W + x] = (T)acc;
            }
    return out;
}

// Brute-force window enumeration for 2x2/stride-2 max pooling.
template <class T>
illu::BasicTensor<T> maxpool2_direct(const illu::BasicTensor<T>& in) {
    const size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    illu::BasicTensor<T> out({C, H / 2, W / 2});
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < H / 2; ++y)
            for (size_t x = 0; x < W / 2; ++x) {
                T m = in[(c * H + 2 * y) * W + 2 * x];
                for (size_t dy = 0; dy < 2; ++dy)
                    for (size_t dx = 0; dx < 2; ++dx)
                        m = std::max(m, in[(c * H + 2 * y + dy) * W + 2 * x + dx]);
                out[(c * H / 2 + y) * W / 2 + x] = m;
            }
    return out;
}

// Double-loop dot product for y = Wx + b.
template <class T>
illu::BasicTensor<T> linear_direct(const illu::BasicTensor<T>& x, const illu::BasicTensor<T>& w,
                                   const illu::BasicTensor<T>& b) {
    const size_t O = w.dim(0), I = w.dim(1);
    illu::BasicTensor<T> out({O});
    for (size_t o = 0; o < O; ++o) {
        double acc = b[o];
        for (size_t i = 0; i < I; ++i) acc += (double)w[o * I + i] * (double)x[i];
        out[o] = (T)acc;
    }
    return out;
}

template <class T>
illu::BasicTensor<T> random_tensor(std::vector<size_t> shape, uint64_t seed, double scale = 1.0) {
    illu::Rng rng(seed);
    illu::BasicTensor<T> t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = (T)(scale * rng.normal());
    return t;
}

inline double max_rel_err(double a, double b, double floor_abs) {
    double diff = std::abs(a - b);
    double mag = std::max(std::abs(a), std::abs(b));
    if (mag < floor_abs) return 0.0;
    return diff / mag;
}

// Relative error with a noise floor on the absolute difference: a central
// finite difference carries irreducible roundoff noise of about
// eps_machine * |loss| / (2*eps), so differences below that cannot be
// distinguished from agreement.
inline double grad_rel_err(double a, double b, double noise_floor) {
    double diff = std::abs(a - b);
    if (diff <= noise_floor) return 0.0;
    return diff / std::max(std::abs(a), std::abs(b));
}

}  // namespace oracle
