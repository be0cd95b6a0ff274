// Rough throughput probe for the desk-scale net: one epoch-equivalent of
// forward+backward over random batches. Not part of the shipped build.
#include <chrono>
#include <cstdio>
#include <vector>
#include "illu/net.hpp"
using namespace illu;
int main(int argc, char** argv) {
    int n_images = argc > 1 ? atoi(argv[1]) : 128;
    ScaleConfig s;  // default desk scale 64x64
    auto net = build_network<float>(s, {"a","b","c","d","e","f"}, 1);
    printf("params: %zu\n", net.parameter_count());
    Rng rng(2);
    std::vector<Tensor> imgs;
    for (int i = 0; i < 32; ++i) {
        Tensor t({3,64,64});
        for (size_t j = 0; j < t.size(); ++j) t[j] = (float)rng.normal()*0.3f;
        imgs.push_back(std::move(t));
    }
    std::vector<const Tensor*> batch;
    std::vector<int> labels;
    for (int i = 0; i < 32; ++i) { batch.push_back(&imgs[i]); labels.push_back(i % 6); }
    Gradients<float> grads;
    Velocity<float> vel;
    TrainConfig cfg;
    std::map<int,float> lr;
    for (auto& l : net.layers) lr[l.index] = 1e-2f;
    auto t0 = std::chrono::steady_clock::now();
    int batches = (n_images + 31) / 32;
    for (int b = 0; b < batches; ++b) {
        backprop(net, batch, labels, RunMode::train, 0.5, b, grads);
        sgd_step(net, grads, lr, cfg, vel);
    }
    auto t1 = std::chrono::steady_clock::now();
    double sec = std::chrono::duration<double>(t1 - t0).count();
    printf("%d images fwd+bwd in %.2f s -> %.1f img/s; est 768-img epoch: %.1f s\n",
           batches*32, sec, batches*32/sec, 768.0/(batches*32/sec));
    // eval-only forward rate
    auto t2 = std::chrono::steady_clock::now();
    ForwardCache<float> cache;
    for (int i = 0; i < 96; ++i) forward(net, imgs[i%32], RunMode::eval, 0.0, nullptr, cache);
    auto t3 = std::chrono::steady_clock::now();
    double esec = std::chrono::duration<double>(t3 - t2).count();
    printf("eval: %.1f img/s\n", 96/esec);
    return 0;
}
