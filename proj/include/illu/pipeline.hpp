#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "illu/codes.hpp"
#include "illu/dataset.hpp"
#include "illu/eval.hpp"
#include "illu/svm.hpp"
#include "illu/transfer.hpp"

namespace illu {

// Full softmax rankings for one split of a manifest, in manifest order.
PredictionSet predict_with_net(const Network& net, const DatasetManifest& manifest,
                               const std::string& split);

// Full decision-value rankings for pre-extracted codes.
PredictionSet predict_with_svm(const SvmModel& model, const NeuralCodes& codes,
                               const DatasetManifest& manifest);

// The four-model comparison: generate both synthetic domains, train the
// baseline on the natural domain, adapt it to the illustration domain, and
// evaluate Baseline / Baseline+SVM / Optimized / Optimized+SVM on the
// illustration test split. Every artifact lands under out_dir.
struct PipelineOptions {
    std::filesystem::path out_dir;
    uint64_t seed = 1;
    int classes = 6;
    int per_class = 200;
    int side = 64;
    double label_noise = 0.0;
    int scratch_epochs = 30;
    int finetune_epochs = 25;
    int batch_size = 32;
    int patience = 8;
    std::string policy_text;  // empty -> the default adaptive policy
    int folds = 3;
    std::filesystem::path grid_file;  // empty -> default grid
    bool run_tsne = true;
    double perplexity = 30.0;
    int tsne_iterations = 1000;
};

struct PipelineResult {
    double baseline_illu_top1 = 0, baseline_illu_top5 = 0;
    double baseline_svm_illu_top1 = 0, baseline_svm_illu_top5 = 0;
    double optimized_illu_top1 = 0, optimized_illu_top5 = 0;
    double optimized_svm_illu_top1 = 0, optimized_svm_illu_top5 = 0;
    double baseline_natural_top1 = 0;
    double optimized_natural_top1 = 0;
    double purity_baseline = 0;
    double purity_optimized = 0;
    std::vector<double> optimized_kl_trace;
};

PipelineResult run_pipeline(const PipelineOptions& opts);

// comparison.tsv shaped like the four-row model table
void save_comparison_tsv(const PipelineResult& r, const std::filesystem::path& path);

}  // namespace illu
