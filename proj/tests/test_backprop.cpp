#include <doctest.h>

#include <cmath>

#include "illu/net.hpp"
#include "oracles.hpp"

using namespace illu;

namespace {

// Mean cross-entropy loss of a batch through the eval-mode forward pass,
// accumulated in double: the quantity the finite-difference oracle probes.
template <class T>
double batch_loss(const Net<T>& net, const std::vector<BasicTensor<T>>& images,
                  const std::vector<int>& labels) {
    double total = 0;
    for (size_t i = 0; i < images.size(); ++i) {
        auto probs = softmax(forward_logits(net, images[i]));
        total -= std::log(std::max(static_cast<double>(probs[labels[i]]), 1e-12));
    }
    return total / static_cast<double>(images.size());
}

// Central finite differences over every parameter of the net; returns the
// worst relative error against backprop. noise_floor bounds the absolute
// difference attributable to roundoff in the finite-difference probe.
template <class T>
double fd_max_rel_err(Net<T> net, const std::vector<BasicTensor<T>>& images,
                      const std::vector<int>& labels, double eps, double noise_floor) {
    std::vector<const BasicTensor<T>*> ptrs;
    for (auto& im : images) ptrs.push_back(&im);
    Gradients<T> grads;
    backprop(net, ptrs, labels, RunMode::eval, 0.0, 0, grads);

    double worst = 0;
    auto probe = [&](BasicTensor<T>& param, const BasicTensor<T>& grad) {
        for (size_t i = 0; i < param.size(); ++i) {
            const T saved = param[i];
            param[i] = saved + static_cast<T>(eps);
            double lp = batch_loss(net, images, labels);
            param[i] = saved - static_cast<T>(eps);
            double lm = batch_loss(net, images, labels);
            param[i] = saved;
            double fd = (lp - lm) / (2 * eps);
            worst = std::max(worst, oracle::grad_rel_err(grad[i], fd, noise_floor));
        }
    };
    for (size_t li = 0; li < net.layers.size(); ++li) {
        probe(net.layers[li].weight, grads.weight[li]);
        probe(net.layers[li].bias, grads.bias[li]);
    }
    return worst;
}

ScaleConfig small_scale() {
    ScaleConfig s;
    s.input_side = 8;
    s.input_channels = 4;
    s.blocks = {{1, 3}, {1, 4}};
    s.fc1 = 6;
    s.fc2 = 5;
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("tensor_ops");

TEST_CASE("softmax-CE gradient at the logits is (S - L)/batch") {
    ScaleConfig s = small_scale();
    auto net = build_network<float>(s, {"a", "b"}, 5);
    // zero the final classifier so logits are symmetric (all equal bias)
    net.layers.back().weight.fill(0.f);
    net.layers.back().bias.fill(0.f);

    auto img = oracle::random_tensor<float>({4, 8, 8}, 17, 0.5);
    std::vector<const Tensor*> batch{&img};
    std::vector<int> labels{1};
    Gradients<float> grads;
    backprop(net, batch, labels, RunMode::eval, 0.0, 0, grads);

    // uniform softmax S = (0.5, 0.5); dL/dbias3 = S - L
    CHECK(grads.bias.back()[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(grads.bias.back()[1] == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("backprop matches central finite differences (64-bit verification mode)") {
    auto net32 = build_network<float>(small_scale(), {"a", "b"}, 42);
    auto net = widen(net32);
    std::vector<BasicTensor<double>> images{
        oracle::random_tensor<double>({4, 8, 8}, 100, 0.7),
        oracle::random_tensor<double>({4, 8, 8}, 101, 0.7)};
    std::vector<int> labels{0, 1};
    double worst = fd_max_rel_err(net, images, labels, 1e-5, 1e-8);
    CHECK(worst <= 1e-4);
}

TEST_CASE("backprop matches central finite differences (32-bit, eps 1e-3)") {
    auto net = build_network<float>(small_scale(), {"a", "b"}, 42);
    std::vector<Tensor> images{oracle::random_tensor<float>({4, 8, 8}, 100, 0.7),
                               oracle::random_tensor<float>({4, 8, 8}, 101, 0.7)};
    std::vector<int> labels{0, 1};
    double worst = fd_max_rel_err(net, images, labels, 1e-3, 5e-4);
    CHECK(worst <= 1e-2);
}

TEST_CASE("duplicating a sample leaves mean-loss gradients unchanged") {
    auto net = build_network<float>(small_scale(), {"a", "b"}, 7);
    auto img = oracle::random_tensor<float>({4, 8, 8}, 23, 0.5);
    std::vector<const Tensor*> one{&img};
    std::vector<const Tensor*> two{&img, &img};
    Gradients<float> g1, g2;
    backprop(net, one, {1}, RunMode::eval, 0.0, 0, g1);
    backprop(net, two, {1, 1}, RunMode::eval, 0.0, 0, g2);
    for (size_t li = 0; li < net.layers.size(); ++li) {
        for (size_t i = 0; i < g1.weight[li].size(); ++i)
            CHECK(g1.weight[li][i] == doctest::Approx(g2.weight[li][i]).epsilon(1e-5));
    }
}

TEST_CASE("gradients stay finite and shaped like the parameters") {
    auto net = build_network<float>(small_scale(), {"a", "b", "c"}, 9);
    auto img = oracle::random_tensor<float>({4, 8, 8}, 31, 1.0);
    std::vector<const Tensor*> batch{&img};
    Gradients<float> grads;
    double loss = backprop(net, batch, {2}, RunMode::train, 0.5, 77, grads);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
    for (size_t li = 0; li < net.layers.size(); ++li) {
        CHECK(grads.weight[li].same_shape(net.layers[li].weight));
        CHECK(grads.bias[li].same_shape(net.layers[li].bias));
        CHECK(grads.weight[li].all_finite());
    }
}

TEST_SUITE_END();
