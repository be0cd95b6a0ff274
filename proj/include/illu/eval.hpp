#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "illu/codes.hpp"
#include "illu/tensor.hpp"

namespace illu {

struct Prediction {
    std::string id;
    int true_class = 0;
    std::vector<int> ranking;  // permutation of class indices, best first
};

struct PredictionSet {
    std::vector<std::string> class_names;
    std::vector<Prediction> items;
};

// TSV: header id, true, rank1..rankK; one row per image with class names.
void save_predictions_tsv(const PredictionSet& preds, const std::filesystem::path& path);
PredictionSet load_predictions_tsv(const std::filesystem::path& path);

// Percentage of images whose true class appears in the first k ranks.
double topk_precision(const PredictionSet& preds, int k);

struct ClassMetrics {
    std::string name;
    int images = 0;
    int top1_hits = 0;
    int top5_hits = 0;
};

struct MetricsReport {
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> per_class;  // only classes present in the test set
    int total_images = 0;
    int total_top1 = 0;
    int total_top5 = 0;
    std::vector<std::vector<int>> confusion;  // [true][predicted], top-1

    double global_top1() const { return 100.0 * total_top1 / total_images; }
    double global_top5() const { return 100.0 * total_top5 / total_images; }
};

MetricsReport per_class_report(const PredictionSet& preds);

// rows = classes + global, columns top1/top5, two decimals
void save_report_tsv(const MetricsReport& report, const std::filesystem::path& path);
void save_confusion_tsv(const MetricsReport& report, const std::filesystem::path& path);

// row (top1, top5) out of a saved report, for the comparison table
std::pair<double, double> load_report_global(const std::filesystem::path& path);

// ---- t-SNE ----

struct Embedding2D {
    std::vector<std::array<double, 2>> points;
    std::vector<double> kl_trace;  // KL divergence per iteration (true P)
    double perplexity = 30.0;
    uint64_t seed = 0;
};

// Exact O(n^2) t-SNE: perplexity calibration by binary search (entropy
// tolerance 1e-5), symmetrized affinities, Student-t low-dimensional
// kernel, gradient descent with momentum 0.5 (0.8 after iteration 250) and
// early exaggeration x12 for the first 250 iterations.
Embedding2D tsne_embed(const Tensor& codes, double perplexity, int iterations, uint64_t seed);

// Mean fraction of the k nearest 2-D neighbours sharing the point's label.
double neighbor_purity(const std::vector<std::array<double, 2>>& points,
                       const std::vector<int>& labels, int k = 10);

// TSV: id, x, y, label
void save_embedding_tsv(const Embedding2D& embedding, const std::vector<std::string>& ids,
                        const std::vector<std::string>& labels,
                        const std::filesystem::path& path);

}  // namespace illu
