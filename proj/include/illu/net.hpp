#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "illu/ops.hpp"
#include "illu/rng.hpp"
#include "illu/train.hpp"

namespace illu {

enum class Role : uint8_t { conv = 0, fc = 1 };

// One weighted layer in the forward-order 1-based numbering (the default
// scale yields 19: conv 1-16 in 2,2,4,4,4 blocks, fc 17-19).
template <class T>
struct ParamLayer {
    int index = 0;
    Role role = Role::conv;
    BasicTensor<T> weight;  // conv [F,C,3,3], fc [out,in]
    BasicTensor<T> bias;    // [F] / [out]
};

// VGG-pattern geometry at configurable scale. Defaults: 64x64 input, block
// widths 8,16,32,64,64 (base 8 doubling to a cap of 64), fc widths 64/64.
struct ScaleConfig {
    int input_side = 64;
    int input_channels = 3;
    std::vector<std::array<int, 2>> blocks{{2, 8}, {2, 16}, {4, 32}, {4, 64}, {4, 64}};  // {convs, filters}
    int fc1 = 64;
    int fc2 = 64;

    int conv_layer_count() const {
        int n = 0;
        for (auto& b : blocks) n += b[0];
        return n;
    }
    int weighted_layer_count() const { return conv_layer_count() + 3; }
    int pool_divisor() const { return 1 << static_cast<int>(blocks.size()); }
    int spatial_after_pools() const { return input_side / pool_divisor(); }
    int flatten_dim() const {
        int s = spatial_after_pools();
        return blocks.back()[1] * s * s;
    }

    void validate() const {
        if (blocks.empty()) throw ConfigError("scale: at least one conv block required");
        for (auto& b : blocks)
            if (b[0] <= 0 || b[1] <= 0) throw ConfigError("scale: block entries must be positive");
        if (input_channels <= 0) throw ConfigError("scale: input_channels must be positive");
        if (fc1 <= 0 || fc2 <= 0) throw ConfigError("scale: fc widths must be positive");
        int div = pool_divisor();
        if (input_side <= 0 || input_side % div != 0 || input_side / div < 1)
            throw ConfigError("scale: input_side " + std::to_string(input_side) +
                              " not divisible by " + std::to_string(div));
    }
};

template <class T>
struct Net {
    ScaleConfig scale;
    std::vector<std::string> class_names;
    std::array<float, 3> mean_rgb{0.f, 0.f, 0.f};
    std::vector<ParamLayer<T>> layers;

    int num_classes() const { return static_cast<int>(class_names.size()); }

    const ParamLayer<T>& layer(int index) const {
        if (index < 1 || index > static_cast<int>(layers.size()))
            throw ConfigError("layer index " + std::to_string(index) + " out of range 1.." +
                              std::to_string(layers.size()));
        return layers[static_cast<size_t>(index - 1)];
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
};

using Network = Net<float>;

// He initialization: zero-mean normal with variance 2/fan_in, biases zero.
template <class T>
void init_layer(ParamLayer<T>& layer, Rng& rng) {
    size_t fan_in = layer.role == Role::conv ? layer.weight.dim(1) * 9 : layer.weight.dim(1);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < layer.weight.size(); ++i)
        layer.weight[i] = static_cast<T>(stddev * rng.normal());
    layer.bias.fill(T(0));
}

template <class T = float>
Net<T> build_network(const ScaleConfig& scale, const std::vector<std::string>& class_names,
                     uint64_t seed) {
    scale.validate();
    if (class_names.size() < 2) throw ConfigError("build_network: need at least 2 classes");

    Net<T> net;
    net.scale = scale;
    net.class_names = class_names;
    Rng rng(mix_seed(seed, 0x696e6974));  // "init" stream

    int idx = 1;
    size_t in_c = static_cast<size_t>(scale.input_channels);
    for (auto& b : scale.blocks) {
        size_t filters = static_cast<size_t>(b[1]);
        for (int k = 0; k < b[0]; ++k) {
            ParamLayer<T> l;
            l.index = idx++;
            l.role = Role::conv;
            l.weight = BasicTensor<T>({filters, in_c, 3, 3});
            l.bias = BasicTensor<T>({filters});
            init_layer(l, rng);
            net.layers.push_back(std::move(l));
            in_c = filters;
        }
    }
    const std::array<std::array<size_t, 2>, 3> fc_dims{
        {{static_cast<size_t>(scale.fc1), static_cast<size_t>(scale.flatten_dim())},
         {static_cast<size_t>(scale.fc2), static_cast<size_t>(scale.fc1)},
         {class_names.size(), static_cast<size_t>(scale.fc2)}}};
    for (auto& d : fc_dims) {
        ParamLayer<T> l;
        l.index = idx++;
        l.role = Role::fc;
        l.weight = BasicTensor<T>({d[0], d[1]});
        l.bias = BasicTensor<T>({d[0]});
        init_layer(l, rng);
        net.layers.push_back(std::move(l));
    }
    return net;
}

// Activations retained by a forward pass, for backprop and code extraction.
// Conv inputs are not duplicated: layer li's input is the image (first
// layer), the previous block's pool output (first conv of a block), or the
// previous conv's activation.
template <class T>
struct ForwardCache {
    std::vector<BasicTensor<T>> conv_act;  // post-relu output of each conv layer
    std::vector<BasicTensor<T>> pool_out;  // per block
    std::vector<std::vector<uint32_t>> pool_argmax;
    BasicTensor<T> flat;                // flattened conv output, input to fc1
    BasicTensor<T> fc1_act, fc2_act;    // post-relu (fc2_act are the neural codes)
    BasicTensor<T> fc1_drop, fc2_drop;  // post-dropout, inputs to the next fc
    std::vector<T> drop_mask1, drop_mask2;
    BasicTensor<T> logits;

    const BasicTensor<T>& conv_input(const ScaleConfig& scale, const BasicTensor<T>& image,
                                     size_t li) const {
        size_t first_of_block = 0;
        for (size_t b = 0; b < scale.blocks.size(); ++b) {
            size_t n = static_cast<size_t>(scale.blocks[b][0]);
            if (li < first_of_block + n) {
                if (li > first_of_block) return conv_act[li - 1];
                return b == 0 ? image : pool_out[b - 1];
            }
            first_of_block += n;
        }
        throw ConfigError("conv_input: layer index out of range");
    }
};

// Forward pass. In train mode dropout (probability p) is applied after the
// fc1/fc2 relus, drawing masks from rng; eval mode is a pure function of
// (net, image).
template <class T>
const BasicTensor<T>& forward(const Net<T>& net, const BasicTensor<T>& image, RunMode mode,
                              double dropout_p, Rng* rng, ForwardCache<T>& cache) {
    const size_t S = static_cast<size_t>(net.scale.input_side);
    const size_t C = static_cast<size_t>(net.scale.input_channels);
    if (image.rank() != 3 || image.dim(0) != C || image.dim(1) != S || image.dim(2) != S)
        throw ShapeError("forward: image must be [" + std::to_string(C) + "," + std::to_string(S) +
                         "," + std::to_string(S) + "], got " + image.shape_str());

    const size_t n_conv = static_cast<size_t>(net.scale.conv_layer_count());
    cache.conv_act.resize(n_conv);
    cache.pool_out.resize(net.scale.blocks.size());
    cache.pool_argmax.resize(net.scale.blocks.size());

    size_t li = 0;
    for (size_t b = 0; b < net.scale.blocks.size(); ++b) {
        for (int k = 0; k < net.scale.blocks[b][0]; ++k, ++li) {
            const auto& l = net.layers[li];
            const BasicTensor<T>& in = cache.conv_input(net.scale, image, li);
            BasicTensor<T> z = conv2d(in, l.weight, l.bias);
            for (size_t i = 0; i < z.size(); ++i)
                if (z[i] < T(0)) z[i] = T(0);
            cache.conv_act[li] = std::move(z);
        }
        auto pooled = maxpool2(cache.conv_act[li - 1]);
        cache.pool_argmax[b] = std::move(pooled.argmax);
        cache.pool_out[b] = std::move(pooled.output);
    }

    const BasicTensor<T>& last = cache.pool_out.back();
    cache.flat =
        BasicTensor<T>({last.size()}, std::vector<T>(last.data(), last.data() + last.size()));

    const auto& fc1 = net.layers[li];
    cache.fc1_act = relu(linear(cache.flat, fc1.weight, fc1.bias));
    auto d1 = dropout(cache.fc1_act, dropout_p, mode, rng);
    cache.fc1_drop = std::move(d1.output);
    cache.drop_mask1 = std::move(d1.mask);

    const auto& fc2 = net.layers[li + 1];
    cache.fc2_act = relu(linear(cache.fc1_drop, fc2.weight, fc2.bias));
    auto d2 = dropout(cache.fc2_act, dropout_p, mode, rng);
    cache.fc2_drop = std::move(d2.output);
    cache.drop_mask2 = std::move(d2.mask);

    const auto& fc3 = net.layers[li + 2];
    cache.logits = linear(cache.fc2_drop, fc3.weight, fc3.bias);
    return cache.logits;
}

// Eval-mode logits without keeping the cache alive for the caller.
template <class T>
BasicTensor<T> forward_logits(const Net<T>& net, const BasicTensor<T>& image) {
    ForwardCache<T> cache;
    return forward(net, image, RunMode::eval, 0.0, nullptr, cache);
}

template <class T>
Gradients<T> make_gradients(const Net<T>& net) {
    Gradients<T> g;
    g.weight.reserve(net.layers.size());
    g.bias.reserve(net.layers.size());
    for (auto& l : net.layers) {
        g.weight.emplace_back(l.weight.shape());
        g.bias.emplace_back(l.bias.shape());
    }
    return g;
}

// Backprop of the mean softmax cross-entropy over a batch. Gradients are the
// exact derivatives of the data loss; the L2 term is applied as weight decay
// inside sgd_step. Dropout masks (train mode) are drawn per sample from
// seeds derived from dropout_seed, so results do not depend on evaluation
// order. Returns the mean loss.
template <class T>
double backprop(const Net<T>& net, const std::vector<const BasicTensor<T>*>& images,
                const std::vector<int>& labels, RunMode mode, double dropout_p,
                uint64_t dropout_seed, Gradients<T>& grads) {
    if (images.empty()) throw DataError("backprop: empty batch");
    if (images.size() != labels.size())
        throw ShapeError("backprop: batch size mismatch: " + std::to_string(images.size()) +
                         " images vs " + std::to_string(labels.size()) + " labels");
    if (grads.weight.size() != net.layers.size()) grads = make_gradients(net);
    grads.zero();

    const size_t B = images.size();
    const size_t n_conv = static_cast<size_t>(net.scale.conv_layer_count());
    const int K = net.num_classes();
    double total_loss = 0;

    ForwardCache<T> cache;
    for (size_t s = 0; s < B; ++s) {
        if (labels[s] < 0 || labels[s] >= K)
            throw DataError("backprop: label " + std::to_string(labels[s]) +
                            " out of range for " + std::to_string(K) + " classes");
        Rng drng(mix_seed(dropout_seed, 0x64726f70, s));
        forward(net, *images[s], mode, dropout_p, &drng, cache);

        BasicTensor<T> probs = softmax(cache.logits);
        total_loss -= std::log(std::max(static_cast<double>(probs[labels[s]]), 1e-12));

        // d(mean CE)/dlogits = (S - L) / B
        BasicTensor<T> d = probs;
        d[labels[s]] -= T(1);
        const T inv_b = T(1) / static_cast<T>(B);
        for (size_t i = 0; i < d.size(); ++i) d[i] *= inv_b;

        const size_t i3 = n_conv + 2, i2 = n_conv + 1, i1 = n_conv;
        BasicTensor<T> dx;
        linear_backward(cache.fc2_drop, net.layers[i3].weight, d, dx, grads.weight[i3],
                        grads.bias[i3]);
        dropout_backward_inplace(cache.drop_mask2, dx);
        relu_backward_inplace(cache.fc2_act, dx);
        BasicTensor<T> dx2;
        linear_backward(cache.fc1_drop, net.layers[i2].weight, dx, dx2, grads.weight[i2],
                        grads.bias[i2]);
        dropout_backward_inplace(cache.drop_mask1, dx2);
        relu_backward_inplace(cache.fc1_act, dx2);
        BasicTensor<T> dflat;
        linear_backward(cache.flat, net.layers[i1].weight, dx2, dflat, grads.weight[i1],
                        grads.bias[i1]);

        // back through the conv blocks
        size_t li = n_conv;
        BasicTensor<T> dact;  // gradient at the post-relu activation feeding the next stage
        {
            const auto& shape = cache.conv_act[li - 1].shape();
            BasicTensor<T> dpool(cache.pool_out.back().shape(),
                                 std::vector<T>(dflat.data(), dflat.data() + dflat.size()));
            dact = maxpool2_backward(cache.pool_argmax.back(), dpool, shape);
        }
        for (size_t b = net.scale.blocks.size(); b-- > 0;) {
            if (b + 1 < net.scale.blocks.size()) {
                dact = maxpool2_backward(cache.pool_argmax[b], dact,
                                         cache.conv_act[li - 1].shape());
            }
            for (int k = net.scale.blocks[b][0]; k-- > 0;) {
                --li;
                relu_backward_inplace(cache.conv_act[li], dact);
                BasicTensor<T> din;
                conv2d_backward(cache.conv_input(net.scale, *images[s], li),
                                net.layers[li].weight, dact, din, grads.weight[li],
                                grads.bias[li]);
                dact = std::move(din);
            }
        }
    }
    return total_loss / static_cast<double>(B);
}

// v <- momentum*v + grad + weight_decay*param (decay on weights only);
// param <- param - lr(layer)*v. lr_by_layer must cover every weighted layer.
template <class T>
void sgd_step(Net<T>& net, const Gradients<T>& grads, const std::map<int, float>& lr_by_layer,
              const TrainConfig& cfg, Velocity<T>& velocity) {
    if (velocity.weight.size() != net.layers.size()) {
        velocity = make_gradients(net);
    }
    const T mom = static_cast<T>(cfg.momentum);
    const T wd = static_cast<T>(cfg.weight_decay);
    for (size_t li = 0; li < net.layers.size(); ++li) {
        auto it = lr_by_layer.find(net.layers[li].index);
        if (it == lr_by_layer.end())
            throw ConfigError("sgd_step: no learning rate for layer " +
                              std::to_string(net.layers[li].index));
        const T lr = static_cast<T>(it->second);
        auto& l = net.layers[li];
        T* w = l.weight.data();
        T* vw = velocity.weight[li].data();
        const T* gw = grads.weight[li].data();
        for (size_t i = 0; i < l.weight.size(); ++i) {
            vw[i] = mom * vw[i] + gw[i] + wd * w[i];
            w[i] -= lr * vw[i];
        }
        T* b = l.bias.data();
        T* vb = velocity.bias[li].data();
        const T* gb = grads.bias[li].data();
        for (size_t i = 0; i < l.bias.size(); ++i) {
            vb[i] = mom * vb[i] + gb[i];
            b[i] -= lr * vb[i];
        }
    }
}

// Full class ranking by softmax probability, descending; ties broken by
// ascending class index.
template <class T>
std::vector<int> rank_classes(const BasicTensor<T>& probs) {
    std::vector<int> order(probs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[a] > probs[b]; });
    return order;
}

template <class T>
std::vector<std::pair<std::string, double>> predict_topk(const Net<T>& net,
                                                         const BasicTensor<T>& image, int k) {
    if (k < 1 || k > net.num_classes())
        throw ConfigError("predict_topk: k=" + std::to_string(k) + " out of range 1.." +
                          std::to_string(net.num_classes()));
    BasicTensor<T> probs = softmax(forward_logits(net, image));
    std::vector<int> order = rank_classes(probs);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i)
        out.emplace_back(net.class_names[order[i]], static_cast<double>(probs[order[i]]));
    return out;
}

// Neural codes for one image: the post-relu fc2 activation in eval mode.
template <class T>
BasicTensor<T> neural_code(const Net<T>& net, const BasicTensor<T>& image) {
    ForwardCache<T> cache;
    forward(net, image, RunMode::eval, 0.0, nullptr, cache);
    return cache.fc2_act;
}

template <class T>
Net<double> widen(const Net<T>& net) {
    Net<double> out;
    out.scale = net.scale;
    out.class_names = net.class_names;
    out.mean_rgb = net.mean_rgb;
    out.layers.reserve(net.layers.size());
    for (auto& l : net.layers) {
        ParamLayer<double> d;
        d.index = l.index;
        d.role = l.role;
        d.weight = tensor_cast<double>(l.weight);
        d.bias = tensor_cast<double>(l.bias);
        out.layers.push_back(std::move(d));
    }
    return out;
}

}  // namespace illu
