#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "illu/dataset.hpp"
#include "illu/net.hpp"

namespace illu {

// Per-layer reset flags and learning rates. The default mirrors the
// adaptive scheme: restart layers 1-10 and 17-19 at lr 1e-2, keep 11-16 at
// lr 1e-4.
struct AdaptivePolicy {
    std::set<int> reset_layers;
    std::map<int, float> lr_map;

    static AdaptivePolicy uniform(int layer_count, float lr);
    static AdaptivePolicy paper_default(int layer_count = 19, float lr_reset = 1e-2f,
                                        float lr_keep = 1e-4f);

    // "reset=1-10,17-19; lr.reset=1e-2; lr.keep=1e-4"
    static AdaptivePolicy parse(const std::string& text, int layer_count);
    std::string to_text() const;

    void validate(int layer_count) const;
};

struct EpochStats {
    int epoch = 0;  // 1-based; epoch 0 carries the pre-training validation score
    double train_loss = 0.0;
    double val_top1 = 0.0;
};

struct FinetuneReport {
    double initial_val_top1 = 0.0;
    std::vector<EpochStats> epochs;
    int epochs_run = 0;
    int best_epoch = 0;  // 0 means the initial parameters were never beaten
    std::string stop_reason;  // converged | max_epochs
};

// TSV: epoch, train_loss, val_top1 (epoch 0 row has "-" for train_loss).
void save_report_tsv(const FinetuneReport& report, const std::filesystem::path& path);

// Re-initializes the layers in policy.reset_layers from the seed (same init
// law as build_network), leaves every other byte untouched, and attaches
// new_class_names by rebuilding the classifier layer when it is reset.
Network apply_policy(const Network& net, const AdaptivePolicy& policy, uint64_t seed,
                     const std::vector<std::string>& new_class_names = {});

// Mini-batch SGD with per-layer learning rates from the policy. Shuffles
// per epoch with seeded rng, evaluates validation top-1 each epoch, stops
// after cfg.patience epochs without improvement or at cfg.max_epochs, and
// returns the checkpoint with the best validation top-1.
std::pair<Network, FinetuneReport> finetune(const Network& net, const LabeledImages& train,
                                            const LabeledImages& val, const TrainConfig& cfg,
                                            const AdaptivePolicy& policy);

// Scratch training: fresh network, uniform lr at cfg.base_lr, no resets.
std::pair<Network, FinetuneReport> train_from_scratch(const ScaleConfig& scale,
                                                      const std::vector<std::string>& class_names,
                                                      const LabeledImages& train,
                                                      const LabeledImages& val,
                                                      const TrainConfig& cfg);

// Eval-mode top-1 accuracy in percent.
double top1_accuracy(const Network& net, const LabeledImages& data);

}  // namespace illu
