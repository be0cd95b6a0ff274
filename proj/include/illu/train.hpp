#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "illu/tensor.hpp"

namespace illu {

// Defaults mirror the published training recipe except batch_size, which is
// a desk-scale 32 instead of 256.
struct TrainConfig {
    int batch_size = 32;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    float dropout_p = 0.5f;
    float base_lr = 1e-2f;
    int max_epochs = 40;
    int patience = 8;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (momentum < 0.f || momentum >= 1.f) throw ConfigError("momentum must be in [0,1)");
        if (weight_decay < 0.f) throw ConfigError("weight_decay must be non-negative");
        if (dropout_p < 0.f || dropout_p >= 1.f) throw ConfigError("dropout_p must be in [0,1)");
        if (base_lr <= 0.f) throw ConfigError("base_lr must be positive");
        if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
        if (patience <= 0) throw ConfigError("patience must be positive");
    }
};

// Per-parameter-tensor gradients, parallel to a net's weighted layers
// (slot i holds layer i+1's weight and bias gradients).
template <class T>
struct Gradients {
    std::vector<BasicTensor<T>> weight;
    std::vector<BasicTensor<T>> bias;

    void zero() {
        for (auto& t : weight) t.fill(T(0));
        for (auto& t : bias) t.fill(T(0));
    }
};

template <class T>
using Velocity = Gradients<T>;

}  // namespace illu
