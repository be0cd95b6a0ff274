#include "illu/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "illu/rng.hpp"
#include "illu/tsv.hpp"

namespace illu {

static_assert(std::endian::native == std::endian::little,
              "svm model payloads are written as native little-endian");

std::string kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::rbf: return "rbf";
        case KernelKind::sigmoid: return "sigmoid";
        case KernelKind::linear: return "linear";
    }
    throw ConfigError("unknown kernel kind");
}

KernelKind parse_kernel(const std::string& s) {
    if (s == "rbf") return KernelKind::rbf;
    if (s == "sigmoid") return KernelKind::sigmoid;
    if (s == "linear") return KernelKind::linear;
    throw ConfigError("unknown kernel '" + s + "' (expected rbf, sigmoid or linear)");
}

namespace {

double dot(const float* a, const float* b, size_t d) {
    double s = 0;
    for (size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

double kernel_from_dots(const KernelSpec& spec, double dot_xy, double dot_xx, double dot_yy) {
    switch (spec.kind) {
        case KernelKind::rbf: return std::exp(-spec.gamma * (dot_xx + dot_yy - 2.0 * dot_xy));
        case KernelKind::sigmoid: return std::tanh(spec.gamma * dot_xy + spec.coef0);
        case KernelKind::linear: return dot_xy;
    }
    throw ConfigError("unknown kernel kind");
}

// Dense symmetric kernel matrix over the code rows.
std::vector<double> kernel_matrix(const Tensor& codes, const KernelSpec& spec) {
    const size_t n = codes.dim(0), d = codes.dim(1);
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i)
        norms[i] = dot(codes.data() + i * d, codes.data() + i * d, d);
    std::vector<double> K(n * n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double dij = dot(codes.data() + i * d, codes.data() + j * d, d);
            double k = kernel_from_dots(spec, dij, norms[i], norms[j]);
            K[i * n + j] = k;
            K[j * n + i] = k;
        }
    }
    return K;
}

struct SmoSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    double dual_objective = 0.0;
    long iterations = 0;
};

// Maximal-violating-pair SMO on: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0,
// with Q_ij = y_i y_j K_ij. Gradient G = Qa - e is kept exactly.
SmoSolution solve_smo(const std::vector<double>& K, const std::vector<int>& y, size_t n,
                      double C, double tol, long max_passes) {
    std::vector<double> alpha(n, 0.0);
    std::vector<double> G(n, -1.0);
    long iter = 0;

    for (; iter < max_passes; ++iter) {
        // working set: i maximizes -yG over I_up, j minimizes over I_low
        int i = -1, j = -1;
        double m = -std::numeric_limits<double>::infinity();
        double M = std::numeric_limits<double>::infinity();
        for (size_t t = 0; t < n; ++t) {
            const double v = -y[t] * G[t];
            const bool up = y[t] > 0 ? alpha[t] < C : alpha[t] > 0;
            const bool low = y[t] > 0 ? alpha[t] > 0 : alpha[t] < C;
            if (up && v > m) {
                m = v;
                i = static_cast<int>(t);
            }
            if (low && v < M) {
                M = v;
                j = static_cast<int>(t);
            }
        }
        if (i < 0 || j < 0 || m - M <= tol) break;

        const double* Ki = K.data() + static_cast<size_t>(i) * n;
        const double* Kj = K.data() + static_cast<size_t>(j) * n;
        double eta = Ki[i] + Kj[j] - 2.0 * Ki[j];
        if (eta < 1e-12) eta = 1e-12;

        // step s along da_i = y_i s, da_j = -y_j s, clipped to the box
        double s = (m - M) / eta;
        double s_max_i = y[i] > 0 ? C - alpha[i] : alpha[i];
        double s_max_j = y[j] > 0 ? alpha[j] : C - alpha[j];
        s = std::min(s, std::min(s_max_i, s_max_j));

        const double dai = y[i] * s;
        const double daj = -y[j] * s;
        alpha[i] += dai;
        alpha[j] += daj;
        for (size_t t = 0; t < n; ++t)
            G[t] += y[t] * (y[i] * Ki[t] * dai + y[j] * Kj[t] * daj);
    }

    SmoSolution sol;
    sol.iterations = iter;
    sol.alpha = std::move(alpha);

    // b from free vectors (KKT: y_t f(x_t) = 1), else the bound midpoint
    double free_sum = 0.0;
    size_t free_count = 0;
    double m = -std::numeric_limits<double>::infinity();
    double M = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < n; ++t) {
        const double v = -y[t] * G[t];
        const bool up = y[t] > 0 ? sol.alpha[t] < C : sol.alpha[t] > 0;
        const bool low = y[t] > 0 ? sol.alpha[t] > 0 : sol.alpha[t] < C;
        if (up) m = std::max(m, v);
        if (low) M = std::min(M, v);
        if (sol.alpha[t] > 0.0 && sol.alpha[t] < C) {
            free_sum += v;
            ++free_count;
        }
    }
    sol.bias = free_count > 0 ? free_sum / static_cast<double>(free_count) : (m + M) / 2.0;

    double sum_alpha = 0.0, alpha_g = 0.0;
    for (size_t t = 0; t < n; ++t) {
        sum_alpha += sol.alpha[t];
        alpha_g += sol.alpha[t] * G[t];
    }
    sol.dual_objective = 0.5 * (sum_alpha - alpha_g);
    return sol;
}

BinarySvm build_machine(const Tensor& codes, const std::vector<int>& y, const KernelSpec& spec,
                        double C, const SmoSolution& sol) {
    const size_t n = codes.dim(0), d = codes.dim(1);
    constexpr double kAlphaTol = 1e-8;
    BinarySvm svm;
    svm.kernel = spec;
    svm.C = C;
    svm.dim = d;
    svm.bias = sol.bias;
    svm.dual_objective = sol.dual_objective;
    svm.iterations = sol.iterations;
    for (size_t i = 0; i < n; ++i) {
        if (sol.alpha[i] <= kAlphaTol) continue;
        svm.coef.push_back(sol.alpha[i] * y[i]);
        const float* row = codes.data() + i * d;
        svm.support_vectors.insert(svm.support_vectors.end(), row, row + d);
    }
    return svm;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const float> x, std::span<const float> y) {
    if (x.size() != y.size())
        throw ShapeError("kernel_eval: dimension mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    double dxy = dot(x.data(), y.data(), x.size());
    if (spec.kind == KernelKind::rbf) {
        double dxx = dot(x.data(), x.data(), x.size());
        double dyy = dot(y.data(), y.data(), y.size());
        return kernel_from_dots(spec, dxy, dxx, dyy);
    }
    return kernel_from_dots(spec, dxy, 0, 0);
}

double decision_value(const BinarySvm& svm, std::span<const float> x) {
    if (x.size() != svm.dim)
        throw ShapeError("decision_value: input dim " + std::to_string(x.size()) +
                         " does not match model dim " + std::to_string(svm.dim));
    double f = svm.bias;
    for (size_t i = 0; i < svm.support_count(); ++i)
        f += svm.coef[i] * kernel_eval(svm.kernel, {svm.support(i), svm.dim}, x);
    return f;
}

BinarySvm train_binary(const Tensor& codes, const std::vector<int>& y, const KernelSpec& spec,
                       double C, const SmoParams& params) {
    if (codes.rank() != 2) throw ShapeError("train_binary: codes must be [n,d]");
    const size_t n = codes.dim(0);
    if (y.size() != n)
        throw ShapeError("train_binary: " + std::to_string(n) + " rows vs " +
                         std::to_string(y.size()) + " labels");
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) pos = true;
        else if (v == -1) neg = true;
        else throw DataError("train_binary: labels must be +1/-1");
    }
    if (!pos || !neg) throw DataError("train_binary: need samples of both classes");
    if (C <= 0) throw ConfigError("train_binary: C must be positive");
    if (!codes.all_finite()) throw NumericError("train_binary: non-finite code values");

    auto K = kernel_matrix(codes, spec);
    auto sol = solve_smo(K, y, n, C, params.tol, params.max_passes);
    return build_machine(codes, y, spec, C, sol);
}

SvmModel train_ovr(const Tensor& codes, const std::vector<int>& labels,
                   const std::vector<std::string>& class_names, const KernelSpec& spec, double C,
                   const SmoParams& params) {
    if (class_names.size() < 2) throw ConfigError("train_ovr: need at least 2 classes");
    const size_t n = codes.dim(0);
    if (labels.size() != n)
        throw ShapeError("train_ovr: " + std::to_string(n) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    std::vector<size_t> per_class(class_names.size(), 0);
    for (int l : labels) {
        if (l < 0 || l >= static_cast<int>(class_names.size()))
            throw DataError("train_ovr: label out of range");
        ++per_class[l];
    }
    for (size_t c = 0; c < class_names.size(); ++c)
        if (per_class[c] == 0)
            throw DataError("train_ovr: class '" + class_names[c] + "' has no samples");

    auto K = kernel_matrix(codes, spec);
    SvmModel model;
    model.class_names = class_names;
    model.kernel = spec;
    model.C = C;
    for (size_t c = 0; c < class_names.size(); ++c) {
        std::vector<int> y(n);
        for (size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<int>(c) ? 1 : -1;
        auto sol = solve_smo(K, y, n, C, params.tol, params.max_passes);
        model.machines.push_back(build_machine(codes, y, spec, C, sol));
    }
    return model;
}

std::vector<int> svm_rank_classes(const SvmModel& model, std::span<const float> x) {
    std::vector<double> scores(model.machines.size());
    for (size_t c = 0; c < model.machines.size(); ++c)
        scores[c] = decision_value(model.machines[c], x);
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<std::pair<std::string, double>> svm_predict_topk(const SvmModel& model,
                                                             std::span<const float> x, int k) {
    if (k < 1 || k > static_cast<int>(model.class_names.size()))
        throw ConfigError("svm_predict_topk: k out of range");
    std::vector<double> scores(model.machines.size());
    for (size_t c = 0; c < model.machines.size(); ++c)
        scores[c] = decision_value(model.machines[c], x);
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    std::vector<std::pair<std::string, double>> out;
    for (int i = 0; i < k; ++i) out.emplace_back(model.class_names[order[i]], scores[order[i]]);
    return out;
}

std::vector<GridCell> default_grid() {
    std::vector<GridCell> grid;
    const double cs[] = {0.1, 1.0, 10.0};
    const double gammas[] = {1e-4, 1e-3, 1e-2};
    for (KernelKind k : {KernelKind::rbf, KernelKind::sigmoid})
        for (double c : cs)
            for (double g : gammas) grid.push_back({{k, g, 0.0}, c});
    for (double c : cs) grid.push_back({{KernelKind::linear, 1e-4, 0.0}, c});
    return grid;
}

std::vector<GridCell> load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid file " + path.string());
    std::vector<GridCell> grid;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kernel;
        double c, gamma;
        if (!(ss >> kernel >> c >> gamma))
            throw DataError("grid file line '" + line + "' is not 'kernel C gamma'");
        grid.push_back({{parse_kernel(kernel), gamma, 0.0}, c});
    }
    if (grid.empty()) throw DataError("grid file " + path.string() + " has no cells");
    return grid;
}

namespace {

int kernel_rank(KernelKind k) {
    switch (k) {
        case KernelKind::rbf: return 0;
        case KernelKind::sigmoid: return 1;
        case KernelKind::linear: return 2;
    }
    return 3;
}

bool cell_preferred(const GridCell& a, const GridCell& b) {
    if (a.C != b.C) return a.C < b.C;
    if (a.kernel.gamma != b.kernel.gamma) return a.kernel.gamma < b.kernel.gamma;
    return kernel_rank(a.kernel.kind) < kernel_rank(b.kernel.kind);
}

}  // namespace

GridSearchResult grid_search(const Tensor& codes, const std::vector<int>& labels,
                             int num_classes, const std::vector<GridCell>& grid, int folds,
                             uint64_t seed, const SmoParams& params) {
    if (folds < 2) throw ConfigError("grid_search: need at least 2 folds");
    if (grid.empty()) throw ConfigError("grid_search: empty grid");
    const size_t n = codes.dim(0), d = codes.dim(1);
    if (labels.size() != n) throw ShapeError("grid_search: rows vs labels mismatch");

    // stratified fold assignment: shuffle within class, deal round-robin
    std::vector<int> fold_of(n, -1);
    for (int c = 0; c < num_classes; ++c) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < n; ++i)
            if (labels[i] == c) idx.push_back(i);
        if (idx.size() < static_cast<size_t>(folds))
            throw DataError("grid_search: class " + std::to_string(c) + " has " +
                            std::to_string(idx.size()) + " samples, fewer than " +
                            std::to_string(folds) + " folds");
        Rng rng(mix_seed(seed, 0x666f6c64, static_cast<uint64_t>(c)));
        rng.shuffle(idx);
        for (size_t k = 0; k < idx.size(); ++k)
            fold_of[idx[k]] = static_cast<int>(k % static_cast<size_t>(folds));
    }

    std::vector<std::string> class_ids(num_classes);
    for (int c = 0; c < num_classes; ++c) class_ids[c] = std::to_string(c);

    GridSearchResult result;
    result.folds = folds;
    for (const auto& cell : grid) {
        double acc_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<size_t> tr, te;
            for (size_t i = 0; i < n; ++i) (fold_of[i] == f ? te : tr).push_back(i);
            Tensor tr_codes({tr.size(), d});
            std::vector<int> tr_labels(tr.size());
            for (size_t i = 0; i < tr.size(); ++i) {
                std::copy_n(codes.data() + tr[i] * d, d, tr_codes.data() + i * d);
                tr_labels[i] = labels[tr[i]];
            }
            SvmModel model =
                train_ovr(tr_codes, tr_labels, class_ids, cell.kernel, cell.C, params);
            size_t hits = 0;
            for (size_t i : te) {
                auto order = svm_rank_classes(model, {codes.data() + i * d, d});
                hits += order[0] == labels[i];
            }
            acc_sum += 100.0 * static_cast<double>(hits) / static_cast<double>(te.size());
        }
        result.entries.push_back({cell, acc_sum / folds});
    }

    size_t best = 0;
    for (size_t e = 1; e < result.entries.size(); ++e) {
        const auto& cand = result.entries[e];
        const auto& cur = result.entries[best];
        if (cand.mean_accuracy > cur.mean_accuracy ||
            (cand.mean_accuracy == cur.mean_accuracy && cell_preferred(cand.cell, cur.cell)))
            best = e;
    }
    result.best = result.entries[best].cell;
    result.best_accuracy = result.entries[best].mean_accuracy;
    return result;
}

namespace {

constexpr char kSvmMagic[4] = {'S', 'V', 'M', 'M'};
constexpr uint32_t kSvmVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::string& what, const std::string& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw DataError("svm model truncated while reading " + what + ": " + path);
    return v;
}

}  // namespace

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write svm model " + path.string());
    out.write(kSvmMagic, 4);
    put(out, kSvmVersion);
    put(out, static_cast<uint8_t>(model.kernel.kind));
    put(out, model.kernel.gamma);
    put(out, model.kernel.coef0);
    put(out, model.C);
    put(out, static_cast<uint32_t>(model.class_names.size()));
    for (const auto& name : model.class_names) {
        put(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    const uint32_t dim = model.machines.empty()
                             ? 0
                             : static_cast<uint32_t>(model.machines.front().dim);
    put(out, dim);
    for (const auto& m : model.machines) {
        put(out, static_cast<uint32_t>(m.support_count()));
        for (double c : m.coef) put(out, c);
        put(out, m.bias);
        out.write(reinterpret_cast<const char*>(m.support_vectors.data()),
                  static_cast<std::streamsize>(m.support_vectors.size() * sizeof(float)));
    }
    out.close();
    if (!out) throw DataError("svm model write failed: " + path.string());
}

SvmModel load_svm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open svm model " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSvmMagic, 4) != 0)
        throw DataError("not an svm model file (bad magic): " + path.string());
    const auto version = get<uint32_t>(in, "version", path.string());
    if (version != kSvmVersion)
        throw DataError("unsupported svm model version " + std::to_string(version) + " in " +
                        path.string());
    SvmModel model;
    model.kernel.kind = static_cast<KernelKind>(get<uint8_t>(in, "kernel kind", path.string()));
    if (model.kernel.kind != KernelKind::rbf && model.kernel.kind != KernelKind::sigmoid &&
        model.kernel.kind != KernelKind::linear)
        throw DataError("svm model has unknown kernel kind: " + path.string());
    model.kernel.gamma = get<double>(in, "gamma", path.string());
    model.kernel.coef0 = get<double>(in, "coef0", path.string());
    model.C = get<double>(in, "C", path.string());
    const auto n_classes = get<uint32_t>(in, "class count", path.string());
    if (n_classes < 2) throw DataError("svm model has fewer than 2 classes: " + path.string());
    for (uint32_t c = 0; c < n_classes; ++c) {
        const auto len = get<uint32_t>(in, "class name length", path.string());
        std::string name(len, '\0');
        if (!in.read(name.data(), len))
            throw DataError("svm model truncated in class names: " + path.string());
        model.class_names.push_back(std::move(name));
    }
    const auto dim = get<uint32_t>(in, "dimension", path.string());
    for (uint32_t c = 0; c < n_classes; ++c) {
        BinarySvm m;
        m.kernel = model.kernel;
        m.C = model.C;
        m.dim = dim;
        const auto n_sv = get<uint32_t>(in, "support count", path.string());
        m.coef.resize(n_sv);
        for (auto& v : m.coef) v = get<double>(in, "dual coefficient", path.string());
        m.bias = get<double>(in, "bias", path.string());
        m.support_vectors.resize(static_cast<size_t>(n_sv) * dim);
        if (!in.read(reinterpret_cast<char*>(m.support_vectors.data()),
                     static_cast<std::streamsize>(m.support_vectors.size() * sizeof(float))))
            throw DataError("svm model truncated in support vectors: " + path.string());
        model.machines.push_back(std::move(m));
    }
    if (in.peek() != EOF)
        throw DataError("svm model has trailing bytes: " + path.string());
    return model;
}

}  // namespace illu
