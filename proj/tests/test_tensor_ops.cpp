#include <doctest.h>

#include <cmath>

#include "illu/net.hpp"
#include "illu/ops.hpp"
#include "oracles.hpp"

using namespace illu;

TEST_SUITE_BEGIN("tensor_ops");

TEST_CASE("tensor invariants") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.f, 2.f, 3.f}), ShapeError);
    CHECK(is_one_hot(one_hot(1, 4)));
    CHECK_FALSE(is_one_hot(Tensor({3}, {1.f, 1.f, 0.f})));
}

TEST_CASE("conv2d identity kernel") {
    auto in = oracle::random_tensor<float>({1, 6, 6}, 1);
    Tensor w({1, 1, 3, 3});
    w[4] = 1.f;  // center tap
    Tensor b({1});
    auto out = conv2d(in, w, b);
    for (size_t i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("conv2d zero input gives bias") {
    Tensor in({2, 4, 4});
    auto w = oracle::random_tensor<float>({3, 2, 3, 3}, 2);
    Tensor b({3}, {0.5f, -1.f, 2.f});
    auto out = conv2d(in, w, b);
    for (size_t f = 0; f < 3; ++f)
        for (size_t i = 0; i < 16; ++i) CHECK(out[f * 16 + i] == doctest::Approx(b[f]));
}

TEST_CASE("conv2d matches direct-loop oracle") {
    auto in = oracle::random_tensor<float>({2, 5, 5}, 7);
    auto w = oracle::random_tensor<float>({3, 2, 3, 3}, 8);
    auto b = oracle::random_tensor<float>({3}, 9);
    auto fast = conv2d(in, w, b);
    auto ref = oracle::conv2d_direct(in, w, b);
    REQUIRE(fast.same_shape(ref));
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(oracle::max_rel_err(fast[i], ref[i], 1e-6) <= 1e-5);
}

TEST_CASE("conv2d shape errors name the offending dimensions") {
    Tensor in({2, 4, 4}), w({3, 5, 3, 3}), b({3});
    CHECK_THROWS_WITH_AS(conv2d(in, w, b),
                         doctest::Contains("channel count 5"), ShapeError);
    Tensor w2({3, 2, 5, 5});
    CHECK_THROWS_AS(conv2d(in, w2, b), ShapeError);
}

TEST_CASE("maxpool2 basics") {
    Tensor c({3, 4, 4});
    c.fill(2.5f);
    auto r = maxpool2(c);
    for (size_t i = 0; i < r.output.size(); ++i) CHECK(r.output[i] == 2.5f);

    Tensor t({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    auto p = maxpool2(t);
    CHECK(p.output.size() == 1);
    CHECK(p.output[0] == 4.f);
    CHECK(p.argmax[0] == 3);  // (1,1)

    Tensor odd({1, 3, 4});
    CHECK_THROWS_AS(maxpool2(odd), ShapeError);
}

TEST_CASE("maxpool2 matches window-enumeration oracle") {
    auto in = oracle::random_tensor<float>({3, 8, 8}, 11);
    auto fast = maxpool2(in).output;
    auto ref = oracle::maxpool2_direct(in);
    for (size_t i = 0; i < ref.size(); ++i) CHECK(fast[i] == ref[i]);
}

TEST_CASE("relu") {
    Tensor t({3}, {-1.f, 0.f, 2.f});
    auto r = relu(t);
    CHECK(r[0] == 0.f);
    CHECK(r[1] == 0.f);
    CHECK(r[2] == 2.f);

    auto neg = oracle::random_tensor<float>({20}, 4);
    for (size_t i = 0; i < neg.size(); ++i) neg[i] = -std::abs(neg[i]) - 0.1f;
    auto rn = relu(neg);
    for (size_t i = 0; i < rn.size(); ++i) CHECK(rn[i] == 0.f);

    auto x = oracle::random_tensor<float>({50}, 3);
    CHECK(relu(relu(x)) == relu(x));  // idempotence
}

TEST_CASE("linear basics and oracle") {
    Tensor w({3, 3});
    for (size_t i = 0; i < 3; ++i) w.at(i, i) = 1.f;
    Tensor b({3});
    Tensor x({3}, {1.f, -2.f, 3.f});
    CHECK(linear(x, w, b) == x);

    Tensor zero({3});
    auto wb = oracle::random_tensor<float>({3}, 6);
    auto out = linear(zero, oracle::random_tensor<float>({3, 3}, 5), wb);
    for (size_t i = 0; i < 3; ++i) CHECK(out[i] == wb[i]);

    auto xi = oracle::random_tensor<float>({6}, 5);
    auto wi = oracle::random_tensor<float>({4, 6}, 15);
    auto bi = oracle::random_tensor<float>({4}, 25);
    auto fast = linear(xi, wi, bi);
    auto ref = oracle::linear_direct(xi, wi, bi);
    for (size_t i = 0; i < 4; ++i) CHECK(oracle::max_rel_err(fast[i], ref[i], 1e-6) <= 1e-5);

    CHECK_THROWS_AS(linear(oracle::random_tensor<float>({5}, 1), wi, bi), ShapeError);
}

TEST_CASE("softmax") {
    Tensor z({2});
    auto p = softmax(z);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    Tensor c({4});
    c.fill(-3.7f);
    auto pc = softmax(c);
    for (size_t i = 0; i < 4; ++i) CHECK(pc[i] == doctest::Approx(0.25));

    auto z2 = oracle::random_tensor<float>({7}, 9);
    auto a = softmax(z2);
    Tensor shifted = z2;
    for (size_t i = 0; i < shifted.size(); ++i) shifted[i] += 100.f;
    auto b = softmax(shifted);
    double sum = 0;
    for (size_t i = 0; i < 7; ++i) {
        CHECK(std::abs(a[i] - b[i]) <= 1e-6);
        sum += a[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-5);
    CHECK(is_prob_vector(a));
}

TEST_CASE("dropout") {
    auto x = oracle::random_tensor<float>({100}, 2);
    Rng rng(1);
    CHECK(dropout(x, 0.7, RunMode::eval, &rng).output == x);
    CHECK(dropout(x, 0.0, RunMode::train, &rng).output == x);

    auto big = oracle::random_tensor<float>({10000}, 2);
    for (size_t i = 0; i < big.size(); ++i) big[i] = 1.f;
    Rng r13(13);
    auto d = dropout(big, 0.5, RunMode::train, &r13);
    size_t zeros = 0;
    for (size_t i = 0; i < d.output.size(); ++i) {
        if (d.output[i] == 0.f)
            ++zeros;
        else
            CHECK(d.output[i] == doctest::Approx(2.f));  // survivors scaled by 1/(1-p)
    }
    double frac = double(zeros) / 10000.0;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);

    // deterministic given the seed
    Rng r13b(13);
    auto d2 = dropout(big, 0.5, RunMode::train, &r13b);
    CHECK(d.output == d2.output);
}

TEST_CASE("cross_entropy") {
    std::vector<Tensor> probs{one_hot(2, 4)};
    std::vector<Tensor> labels{one_hot(2, 4)};
    CHECK(cross_entropy(probs, labels) == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<Tensor> p2{Tensor({2}, {0.5f, 0.5f})};
    std::vector<Tensor> l2{one_hot(0, 2)};
    CHECK(cross_entropy(p2, l2) == doctest::Approx(0.693147).epsilon(1e-5));
    std::vector<Tensor> l2b{one_hot(1, 2)};
    CHECK(cross_entropy(p2, l2b) == doctest::Approx(0.693147).epsilon(1e-5));

    // batch of 3 hand-built pairs: mean of the per-sample -log S_true
    std::vector<Tensor> p3{Tensor({3}, {0.7f, 0.2f, 0.1f}), Tensor({3}, {0.1f, 0.8f, 0.1f}),
                           Tensor({3}, {0.25f, 0.25f, 0.5f})};
    std::vector<Tensor> l3{one_hot(0, 3), one_hot(2, 3), one_hot(2, 3)};
    double expected = (-std::log(0.7) - std::log(0.1) - std::log(0.5)) / 3.0;
    CHECK(cross_entropy(p3, l3) == doctest::Approx(expected).epsilon(1e-5));

    CHECK(cross_entropy(p3, l3) >= 0.0);
    std::vector<Tensor> empty;
    CHECK_THROWS_AS(cross_entropy(empty, empty), DataError);
}

TEST_CASE("sgd_step") {
    ScaleConfig tiny;
    tiny.input_side = 8;
    tiny.input_channels = 1;
    tiny.blocks = {{1, 2}};
    tiny.fc1 = 4;
    tiny.fc2 = 4;
    auto net = build_network<float>(tiny, {"a", "b"}, 3);
    TrainConfig cfg;
    std::map<int, float> lr;
    for (auto& l : net.layers) lr[l.index] = 0.1f;

    SUBCASE("zero grads leave params unchanged") {
        cfg.weight_decay = 0.f;
        auto before = net;
        auto grads = make_gradients(net);
        Velocity<float> vel;
        sgd_step(net, grads, lr, cfg, vel);
        for (size_t i = 0; i < net.layers.size(); ++i)
            CHECK(net.layers[i].weight == before.layers[i].weight);
    }

    SUBCASE("single step without momentum") {
        cfg.momentum = 0.f;
        cfg.weight_decay = 0.f;
        auto grads = make_gradients(net);
        grads.weight[0].fill(2.f);
        float w0 = net.layers[0].weight[0];
        Velocity<float> vel;
        sgd_step(net, grads, lr, cfg, vel);
        CHECK(net.layers[0].weight[0] == doctest::Approx(w0 - 0.1f * 2.f));
    }

    SUBCASE("two momentum steps follow the hand recursion v1=g, v2=1.9g") {
        cfg.momentum = 0.9f;
        cfg.weight_decay = 0.f;
        auto grads = make_gradients(net);
        const float g = 0.5f;
        grads.weight[0].fill(g);
        float w0 = net.layers[0].weight[0];
        Velocity<float> vel;
        sgd_step(net, grads, lr, cfg, vel);
        grads.weight[0].fill(g);  // constant gradient
        sgd_step(net, grads, lr, cfg, vel);
        CHECK(net.layers[0].weight[0] == doctest::Approx(w0 - 0.1f * g * (1.f + 1.9f)));
    }

    SUBCASE("missing layer lr is an error") {
        auto grads = make_gradients(net);
        Velocity<float> vel;
        std::map<int, float> partial{{1, 0.1f}};
        CHECK_THROWS_AS(sgd_step(net, grads, partial, cfg, vel), ConfigError);
    }

    SUBCASE("weight decay pulls weights toward zero, biases untouched") {
        cfg.momentum = 0.f;
        cfg.weight_decay = 0.1f;
        net.layers[0].bias.fill(1.f);
        float w0 = net.layers[0].weight[0];
        auto grads = make_gradients(net);
        Velocity<float> vel;
        sgd_step(net, grads, lr, cfg, vel);
        CHECK(net.layers[0].weight[0] == doctest::Approx(w0 - 0.1f * 0.1f * w0));
        CHECK(net.layers[0].bias[0] == 1.f);
    }
}

TEST_SUITE_END();
