#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "illu/rng.hpp"
#include "illu/tensor.hpp"

namespace illu {

namespace detail {

// Copies a [C,H,W] tensor into a zero-padded [C,H+2,W+2] buffer so the conv
// kernels run branch-free over full rows.
template <class T>
std::vector<T> zero_pad1(const BasicTensor<T>& t) {
    const size_t C = t.dim(0), H = t.dim(1), W = t.dim(2);
    std::vector<T> p(C * (H + 2) * (W + 2), T(0));
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < H; ++y)
            std::copy_n(t.data() + (c * H + y) * W, W,
                        p.data() + (c * (H + 2) + y + 1) * (W + 2) + 1);
    return p;
}

// Gathers the nine shifted copies of one padded channel into contiguous
// rows: S[k][y*W+x] = padded[(y+ky)*(W+2) + x+kx], k = ky*3+kx. Turns the
// 3x3 stencil into fused passes over full-length rows, which matters for
// the late blocks where W drops to 4.
template <class T>
void shift_rows(const T* padded, size_t H, size_t W, T* S) {
    const size_t PW = W + 2, HW = H * W;
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
            T* dst = S + static_cast<size_t>(ky * 3 + kx) * HW;
            for (size_t y = 0; y < H; ++y)
                std::copy_n(padded + (y + ky) * PW + kx, W, dst + y * W);
        }
}

// Pixel-major im2col over all channels: M[p][c*9+k] = shifted channel c at
// pixel p. Lays the reduction for the weight gradient out as contiguous
// axpy rows matching the [F][C,3,3] weight layout.
template <class T>
void im2col_pixel_major(const T* padded, size_t C, size_t H, size_t W, T* M) {
    const size_t PW = W + 2, cols = C * 9;
    for (size_t c = 0; c < C; ++c) {
        const T* pc = padded + c * (H + 2) * PW;
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const size_t col = c * 9 + static_cast<size_t>(ky * 3 + kx);
                for (size_t y = 0; y < H; ++y) {
                    const T* src = pc + (y + ky) * PW + kx;
                    T* dst = M + (y * W) * cols + col;
                    for (size_t x = 0; x < W; ++x) dst[x * cols] = src[x];
                }
            }
    }
}

}  // namespace detail

// 3x3 convolution, stride 1, 1 pixel of padding: output spatial size equals
// input spatial size. input [C,H,W], weight [F,C,3,3], bias [F] -> [F,H,W].
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
    if (input.rank() != 3)
        throw ShapeError("conv2d: input must be [C,H,W], got " + input.shape_str());
    if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
        throw ShapeError("conv2d: weight must be [F,C,3,3], got " + weight.shape_str());
    if (weight.dim(1) != input.dim(0))
        throw ShapeError("conv2d: weight channel count " + std::to_string(weight.dim(1)) +
                         " does not match input channel count " + std::to_string(input.dim(0)));
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0))
        throw ShapeError("conv2d: bias must be [" + std::to_string(weight.dim(0)) + "], got " +
                         bias.shape_str());

    const size_t C = input.dim(0), H = input.dim(1), W = input.dim(2), F = weight.dim(0);
    const size_t HW = H * W;
    std::vector<T> padded = detail::zero_pad1(input);
    std::vector<T> S(9 * HW);
    BasicTensor<T> out({F, H, W});
    for (size_t f = 0; f < F; ++f)
        std::fill(out.data() + f * HW, out.data() + (f + 1) * HW, bias[f]);
    for (size_t c = 0; c < C; ++c) {
        detail::shift_rows(padded.data() + c * (H + 2) * (W + 2), H, W, S.data());
        const T* s0 = S.data();
        for (size_t f = 0; f < F; ++f) {
            const T* w = weight.data() + (f * C + c) * 9;
            const T w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4], w5 = w[5],
                    w6 = w[6], w7 = w[7], w8 = w[8];
            T* o = out.data() + f * HW;
            for (size_t p = 0; p < HW; ++p)
                o[p] += w0 * s0[p] + w1 * s0[p + HW] + w2 * s0[p + 2 * HW] +
                        w3 * s0[p + 3 * HW] + w4 * s0[p + 4 * HW] + w5 * s0[p + 5 * HW] +
                        w6 * s0[p + 6 * HW] + w7 * s0[p + 7 * HW] + w8 * s0[p + 8 * HW];
        }
    }
    return out;
}

// Backward of conv2d. grad_weight/grad_bias are accumulated (+=) so a batch
// loop can reuse its buffers; grad_input is overwritten.
template <class T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input,
                     BasicTensor<T>& grad_weight, BasicTensor<T>& grad_bias) {
    const size_t C = input.dim(0), H = input.dim(1), W = input.dim(2), F = weight.dim(0);
    if (!grad_out.same_shape(BasicTensor<T>({F, H, W})))
        throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                         " does not match output [" + std::to_string(F) + "," +
                         std::to_string(H) + "," + std::to_string(W) + "]");
    if (!grad_input.same_shape(input)) grad_input = BasicTensor<T>(input.shape());
    grad_input.fill(T(0));

    const size_t HW = H * W;

    for (size_t f = 0; f < F; ++f) {
        const T* go_f = grad_out.data() + f * HW;
        T gb = 0;
        for (size_t i = 0; i < HW; ++i) gb += go_f[i];
        grad_bias[f] += gb;
    }

    // dL/dW as a pixel-major im2col product: each output pixel contributes
    // go[f,p] * M[p,:] into the contiguous [C*9] weight-gradient row of f.
    {
        std::vector<T> padded_in = detail::zero_pad1(input);
        const size_t cols = C * 9;
        std::vector<T> M(HW * cols);
        detail::im2col_pixel_major(padded_in.data(), C, H, W, M.data());
        for (size_t f = 0; f < F; ++f) {
            const T* go_f = grad_out.data() + f * HW;
            T* gw = grad_weight.data() + f * cols;
            for (size_t p = 0; p < HW; ++p) {
                const T gv = go_f[p];
                if (gv == T(0)) continue;
                const T* row = M.data() + p * cols;
                for (size_t i = 0; i < cols; ++i) gw[i] += gv * row[i];
            }
        }
    }

    // dL/din = correlation of go with the 180-degree-rotated kernel, same
    // padding: din[c,p] += sum_k w[f,c,8-k] * shifted(go_p[f])[k,p].
    {
        std::vector<T> padded_go = detail::zero_pad1(grad_out);
        std::vector<T> S(9 * HW);
        for (size_t f = 0; f < F; ++f) {
            detail::shift_rows(padded_go.data() + f * (H + 2) * (W + 2), H, W, S.data());
            const T* s0 = S.data();
            for (size_t c = 0; c < C; ++c) {
                const T* w = weight.data() + (f * C + c) * 9;
                const T w0 = w[8], w1 = w[7], w2 = w[6], w3 = w[5], w4 = w[4], w5 = w[3],
                        w6 = w[2], w7 = w[1], w8 = w[0];
                T* o = grad_input.data() + c * HW;
                for (size_t p = 0; p < HW; ++p)
                    o[p] += w0 * s0[p] + w1 * s0[p + HW] + w2 * s0[p + 2 * HW] +
                            w3 * s0[p + 3 * HW] + w4 * s0[p + 4 * HW] + w5 * s0[p + 5 * HW] +
                            w6 * s0[p + 6 * HW] + w7 * s0[p + 7 * HW] + w8 * s0[p + 8 * HW];
            }
        }
    }
}

// 2x2 max pooling, stride 2. Argmax (flat input index per output cell) is
// recorded for backprop; ties go to the first element in scan order.
template <class T>
struct PoolResult {
    BasicTensor<T> output;
    std::vector<uint32_t> argmax;
};

template <class T>
PoolResult<T> maxpool2(const BasicTensor<T>& input) {
    if (input.rank() != 3)
        throw ShapeError("maxpool2: input must be [C,H,W], got " + input.shape_str());
    const size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("maxpool2: spatial dims must be even, got " + input.shape_str());
    const size_t OH = H / 2, OW = W / 2;
    PoolResult<T> r{BasicTensor<T>({C, OH, OW}), std::vector<uint32_t>(C * OH * OW)};
    for (size_t c = 0; c < C; ++c) {
        const T* in_c = input.data() + c * H * W;
        for (size_t oy = 0; oy < OH; ++oy) {
            for (size_t ox = 0; ox < OW; ++ox) {
                size_t base = (2 * oy) * W + 2 * ox;
                size_t best = base;
                T bv = in_c[base];
                const size_t cand[3] = {base + 1, base + W, base + W + 1};
                for (size_t k = 0; k < 3; ++k) {
                    if (in_c[cand[k]] > bv) {
                        bv = in_c[cand[k]];
                        best = cand[k];
                    }
                }
                r.output[(c * OH + oy) * OW + ox] = bv;
                r.argmax[(c * OH + oy) * OW + ox] = static_cast<uint32_t>(c * H * W + best);
            }
        }
    }
    return r;
}

template <class T>
BasicTensor<T> maxpool2_backward(const std::vector<uint32_t>& argmax,
                                 const BasicTensor<T>& grad_out,
                                 const std::vector<size_t>& input_shape) {
    BasicTensor<T> grad_in(input_shape);
    for (size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax[i]] += grad_out[i];
    return grad_in;
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    for (size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
    return out;
}

// Masks on the forward output (out > 0), done in place on grad.
template <class T>
void relu_backward_inplace(const BasicTensor<T>& out, BasicTensor<T>& grad) {
    for (size_t i = 0; i < out.size(); ++i)
        if (!(out[i] > T(0))) grad[i] = T(0);
}

// y = W x + b. input [D_in], weight [D_out, D_in], bias [D_out].
template <class T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
    if (input.rank() != 1)
        throw ShapeError("linear: input must be rank 1, got " + input.shape_str());
    if (weight.rank() != 2 || weight.dim(1) != input.dim(0))
        throw ShapeError("linear: weight " + weight.shape_str() + " incompatible with input " +
                         input.shape_str());
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(0))
        throw ShapeError("linear: bias " + bias.shape_str() + " incompatible with weight " +
                         weight.shape_str());
    const size_t O = weight.dim(0), I = weight.dim(1);
    BasicTensor<T> out({O});
    const T* x = input.data();
    for (size_t o = 0; o < O; ++o) {
        const T* w = weight.data() + o * I;
        T acc = bias[o];
#pragma omp simd reduction(+ : acc)
        for (size_t i = 0; i < I; ++i) acc += w[i] * x[i];
        out[o] = acc;
    }
    return out;
}

template <class T>
void linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input,
                     BasicTensor<T>& grad_weight, BasicTensor<T>& grad_bias) {
    const size_t O = weight.dim(0), I = weight.dim(1);
    if (grad_out.size() != O)
        throw ShapeError("linear_backward: grad_out " + grad_out.shape_str() +
                         " does not match output size " + std::to_string(O));
    if (grad_input.size() != I) grad_input = BasicTensor<T>({I});
    grad_input.fill(T(0));
    for (size_t o = 0; o < O; ++o) {
        const T g = grad_out[o];
        grad_bias[o] += g;
        const T* w = weight.data() + o * I;
        T* gw = grad_weight.data() + o * I;
        T* gi = grad_input.data();
        const T* x = input.data();
        for (size_t i = 0; i < I; ++i) {
            gw[i] += g * x[i];
            gi[i] += g * w[i];
        }
    }
}

// Numerically stable softmax; invariant under adding a constant to all
// logits, output sums to 1.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
    if (logits.rank() != 1 || logits.size() == 0)
        throw ShapeError("softmax: logits must be non-empty rank 1, got " + logits.shape_str());
    T mx = logits[0];
    for (size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    BasicTensor<T> out(logits.shape());
    double sum = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double e = std::exp(static_cast<double>(logits[i] - mx));
        out[i] = static_cast<T>(e);
        sum += e;
    }
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(out[i] / sum);
    return out;
}

enum class RunMode { train, eval };

// Inverted dropout: in train mode each element is zeroed with probability p
// and survivors are scaled by 1/(1-p), so eval mode is the identity. The
// mask of scale factors is returned for backprop (empty in eval mode).
template <class T>
struct DropoutResult {
    BasicTensor<T> output;
    std::vector<T> mask;
};

template <class T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double p, RunMode mode, Rng* rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
    if (mode == RunMode::eval || p == 0.0) return {input, {}};
    if (!rng) throw ConfigError("dropout: train mode requires an rng");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    DropoutResult<T> r{BasicTensor<T>(input.shape()), std::vector<T>(input.size())};
    for (size_t i = 0; i < input.size(); ++i) {
        const T m = rng->uniform() < p ? T(0) : keep_scale;
        r.mask[i] = m;
        r.output[i] = m * input[i];
    }
    return r;
}

template <class T>
void dropout_backward_inplace(const std::vector<T>& mask, BasicTensor<T>& grad) {
    if (mask.empty()) return;  // eval mode: identity
    for (size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
}

// Mean cross-entropy over a batch: per sample -sum_k L_k log(max(S_k,1e-12)).
template <class T>
double cross_entropy(const std::vector<BasicTensor<T>>& probs,
                     const std::vector<BasicTensor<T>>& labels) {
    if (probs.empty()) throw DataError("cross_entropy: empty batch");
    if (probs.size() != labels.size())
        throw ShapeError("cross_entropy: batch sizes differ: " + std::to_string(probs.size()) +
                         " vs " + std::to_string(labels.size()));
    double total = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!probs[i].same_shape(labels[i]))
            throw ShapeError("cross_entropy: class counts differ at sample " + std::to_string(i) +
                             ": " + probs[i].shape_str() + " vs " + labels[i].shape_str());
        double sample = 0;
        for (size_t k = 0; k < probs[i].size(); ++k) {
            double l = labels[i][k];
            if (l != 0.0)
                sample -= l * std::log(std::max(static_cast<double>(probs[i][k]), 1e-12));
        }
        total += sample;
    }
    return total / static_cast<double>(probs.size());
}

}  // namespace illu
