#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "illu/tensor.hpp"

namespace illu {

enum class KernelKind : uint8_t { rbf = 0, sigmoid = 1, linear = 2 };

std::string kernel_name(KernelKind k);
KernelKind parse_kernel(const std::string& s);

// rbf: exp(-gamma*|x-y|^2); sigmoid: tanh(gamma*<x,y> + coef0); linear: <x,y>
struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double gamma = 1e-4;
    double coef0 = 0.0;
};

double kernel_eval(const KernelSpec& spec, std::span<const float> x, std::span<const float> y);

// Soft-margin binary machine. coef[i] = alpha_i * y_i over the kept support
// vectors; decision f(x) = sum_i coef_i K(sv_i, x) + bias.
struct BinarySvm {
    KernelSpec kernel;
    double C = 1.0;
    size_t dim = 0;
    std::vector<float> support_vectors;  // [n_sv, dim] row-major
    std::vector<double> coef;
    double bias = 0.0;
    double dual_objective = 0.0;  // max-form value at convergence
    long iterations = 0;

    size_t support_count() const { return coef.size(); }
    const float* support(size_t i) const { return support_vectors.data() + i * dim; }
};

double decision_value(const BinarySvm& svm, std::span<const float> x);

struct SmoParams {
    double tol = 1e-3;        // KKT violation tolerance (m - M <= tol stops)
    long max_passes = 2000000;  // cap on pair updates
};

// SMO with maximal-violating-pair selection on the dual QP.
BinarySvm train_binary(const Tensor& codes, const std::vector<int>& y /*+1/-1*/,
                       const KernelSpec& spec, double C, const SmoParams& params = {});

// One-vs-rest multiclass on shared codes.
struct SvmModel {
    std::vector<std::string> class_names;
    KernelSpec kernel;
    double C = 1.0;
    std::vector<BinarySvm> machines;  // one per class, in class order
};

SvmModel train_ovr(const Tensor& codes, const std::vector<int>& labels,
                   const std::vector<std::string>& class_names, const KernelSpec& spec, double C,
                   const SmoParams& params = {});

// Full ranking by decision value, descending; ties by ascending class index.
std::vector<int> svm_rank_classes(const SvmModel& model, std::span<const float> x);
std::vector<std::pair<std::string, double>> svm_predict_topk(const SvmModel& model,
                                                             std::span<const float> x, int k);

// ---- grid search ----

struct GridCell {
    KernelSpec kernel;
    double C = 1.0;
};

struct GridSearchResult {
    struct Entry {
        GridCell cell;
        double mean_accuracy = 0.0;  // mean held-out top-1 percent over folds
    };
    std::vector<Entry> entries;
    GridCell best;
    double best_accuracy = 0.0;
    int folds = 3;
};

// Includes the published operating points (rbf, C=1, gamma=1e-4) and
// (sigmoid, C=10, gamma=1e-4).
std::vector<GridCell> default_grid();

// text file, one cell per line: kernel C gamma
std::vector<GridCell> load_grid(const std::filesystem::path& path);

// Stratified k-fold cross validation, seed-deterministic. Ties prefer
// smaller C, then smaller gamma, then kernel order rbf < sigmoid < linear.
GridSearchResult grid_search(const Tensor& codes, const std::vector<int>& labels,
                             int num_classes, const std::vector<GridCell>& grid, int folds,
                             uint64_t seed, const SmoParams& params = {});

// versioned binary model file; round-trips byte-identically
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace illu
