#include "illu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "illu/rng.hpp"
#include "illu/tsv.hpp"

namespace illu {

void save_predictions_tsv(const PredictionSet& preds, const std::filesystem::path& path) {
    TsvWriter out(path);
    std::vector<std::string> header{"id", "true"};
    for (size_t k = 0; k < preds.class_names.size(); ++k)
        header.push_back("rank" + std::to_string(k + 1));
    out.row(header);
    for (const auto& p : preds.items) {
        std::vector<std::string> cells{p.id, preds.class_names[p.true_class]};
        for (int c : p.ranking) cells.push_back(preds.class_names[c]);
        out.row(cells);
    }
    out.close();
}

PredictionSet load_predictions_tsv(const std::filesystem::path& path) {
    auto rows = read_tsv(path);
    if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "id" || rows[0][1] != "true")
        throw DataError("predictions file " + path.string() + " missing id/true/rank header");
    const size_t k = rows[0].size() - 2;
    PredictionSet preds;
    auto class_of = [&](const std::string& name) {
        for (size_t i = 0; i < preds.class_names.size(); ++i)
            if (preds.class_names[i] == name) return static_cast<int>(i);
        preds.class_names.push_back(name);
        return static_cast<int>(preds.class_names.size() - 1);
    };
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != k + 2)
            throw DataError("predictions row " + std::to_string(r + 1) +
                            " has inconsistent width: " + path.string());
        Prediction p;
        p.id = rows[r][0];
        p.true_class = class_of(rows[r][1]);
        for (size_t i = 0; i < k; ++i) p.ranking.push_back(class_of(rows[r][2 + i]));
        preds.items.push_back(std::move(p));
    }
    // rankings must be permutations of the same class set
    for (const auto& p : preds.items) {
        if (p.ranking.size() != preds.class_names.size())
            throw DataError("predictions for '" + p.id + "' do not rank every class");
        std::vector<bool> seen(preds.class_names.size(), false);
        for (int c : p.ranking) {
            if (c < 0 || seen[c])
                throw DataError("predictions for '" + p.id + "' are not a permutation");
            seen[c] = true;
        }
    }
    return preds;
}

double topk_precision(const PredictionSet& preds, int k) {
    if (preds.items.empty()) throw DataError("topk_precision: empty prediction set");
    const int num_classes = static_cast<int>(preds.class_names.size());
    if (k < 1 || k > num_classes)
        throw ConfigError("topk_precision: k=" + std::to_string(k) + " out of range 1.." +
                          std::to_string(num_classes));
    size_t hits = 0;
    for (const auto& p : preds.items)
        for (int r = 0; r < k; ++r)
            if (p.ranking[r] == p.true_class) {
                ++hits;
                break;
            }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.items.size());
}

MetricsReport per_class_report(const PredictionSet& preds) {
    if (preds.items.empty()) throw DataError("per_class_report: empty prediction set");
    const size_t K = preds.class_names.size();
    const int k5 = std::min<int>(5, static_cast<int>(K));
    MetricsReport report;
    report.class_names = preds.class_names;
    std::vector<ClassMetrics> rows(K);
    for (size_t c = 0; c < K; ++c) rows[c].name = preds.class_names[c];
    report.confusion.assign(K, std::vector<int>(K, 0));

    for (const auto& p : preds.items) {
        auto& row = rows[p.true_class];
        ++row.images;
        ++report.total_images;
        if (p.ranking[0] == p.true_class) {
            ++row.top1_hits;
            ++report.total_top1;
        }
        for (int r = 0; r < k5; ++r)
            if (p.ranking[r] == p.true_class) {
                ++row.top5_hits;
                ++report.total_top5;
                break;
            }
        ++report.confusion[p.true_class][p.ranking[0]];
    }
    for (auto& row : rows)
        if (row.images > 0) report.per_class.push_back(row);  // absent classes stay absent
    return report;
}

void save_report_tsv(const MetricsReport& report, const std::filesystem::path& path) {
    TsvWriter out(path);
    out.row({"class", "top1", "top5"});
    for (const auto& row : report.per_class)
        out.row({row.name, fmt_f2(100.0 * row.top1_hits / row.images),
                 fmt_f2(100.0 * row.top5_hits / row.images)});
    out.row({"global", fmt_f2(report.global_top1()), fmt_f2(report.global_top5())});
    out.close();
}

void save_confusion_tsv(const MetricsReport& report, const std::filesystem::path& path) {
    TsvWriter out(path);
    std::vector<std::string> header{""};
    header.insert(header.end(), report.class_names.begin(), report.class_names.end());
    out.row(header);
    for (size_t t = 0; t < report.class_names.size(); ++t) {
        std::vector<std::string> cells{report.class_names[t]};
        for (size_t p = 0; p < report.class_names.size(); ++p)
            cells.push_back(std::to_string(report.confusion[t][p]));
        out.row(cells);
    }
    out.close();
}

std::pair<double, double> load_report_global(const std::filesystem::path& path) {
    auto rows = read_tsv(path);
    for (const auto& row : rows)
        if (row.size() == 3 && row[0] == "global")
            return {parse_double(row[1], "top1"), parse_double(row[2], "top5")};
    throw DataError("report " + path.string() + " has no global row");
}

// ---- t-SNE ----

Embedding2D tsne_embed(const Tensor& codes, double perplexity, int iterations, uint64_t seed) {
    if (codes.rank() != 2) throw ShapeError("tsne_embed: codes must be [n,d]");
    const size_t n = codes.dim(0), d = codes.dim(1);
    if (perplexity <= 0) throw ConfigError("tsne_embed: perplexity must be positive");
    if (static_cast<double>(n) < 3.0 * perplexity)
        throw ConfigError("tsne_embed: need n >= 3*perplexity (n=" + std::to_string(n) +
                          ", perplexity=" + std::to_string(perplexity) + ")");
    if (n > 5000) throw ConfigError("tsne_embed: exact method capped at n=5000");
    if (iterations < 1) throw ConfigError("tsne_embed: iterations must be positive");

    // pairwise squared distances
    std::vector<double> D(n * n, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double s = 0;
            const float* a = codes.data() + i * d;
            const float* b = codes.data() + j * d;
            for (size_t t = 0; t < d; ++t) {
                double diff = static_cast<double>(a[t]) - static_cast<double>(b[t]);
                s += diff * diff;
            }
            D[i * n + j] = s;
            D[j * n + i] = s;
        }

    // per-point precision by binary search to the target entropy
    const double target_entropy = std::log(perplexity);
    std::vector<double> P(n * n, 0.0);
    std::vector<double> row(n);
    for (size_t i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 200; ++it) {
            double sum = 0.0, dsum = 0.0;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                row[j] = std::exp(-beta * D[i * n + j]);
                sum += row[j];
                dsum += D[i * n + j] * row[j];
            }
            // H = log(sum) + beta * <D>
            double entropy = sum > 0 ? std::log(sum) + beta * dsum / sum : 0.0;
            double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = (beta + beta_lo) / 2.0;
            }
        }
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) sum += row[j];
        if (sum <= 0) {
            // all neighbours at identical positions: uniform conditionals
            for (size_t j = 0; j < n; ++j) row[j] = j == i ? 0.0 : 1.0;
            sum = static_cast<double>(n - 1);
        }
        for (size_t j = 0; j < n; ++j) P[i * n + j] = row[j] / sum;
    }

    // symmetrize, normalize, floor
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double v = (P[i * n + j] + P[j * n + i]) / (2.0 * static_cast<double>(n));
            v = std::max(v, 1e-12);
            P[i * n + j] = v;
            P[j * n + i] = v;
        }

    Embedding2D emb;
    emb.perplexity = perplexity;
    emb.seed = seed;
    emb.points.resize(n);
    Rng rng(mix_seed(seed, 0x74736e65));
    for (auto& p : emb.points) {
        p[0] = 1e-4 * rng.normal();
        p[1] = 1e-4 * rng.normal();
    }

    std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
    std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
    std::vector<std::array<double, 2>> grad(n);
    std::vector<double> Q(n * n, 0.0);
    const double eta = 200.0;
    const int exaggeration_until = 250;
    const double exaggeration = 12.0;

    for (int iter = 1; iter <= iterations; ++iter) {
        // Student-t affinities
        double z = 0.0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                double dx = emb.points[i][0] - emb.points[j][0];
                double dy = emb.points[i][1] - emb.points[j][1];
                double q = 1.0 / (1.0 + dx * dx + dy * dy);
                Q[i * n + j] = q;
                Q[j * n + i] = q;
                z += 2.0 * q;
            }
        z = std::max(z, 1e-12);

        const double lie = iter <= exaggeration_until ? exaggeration : 1.0;
        for (size_t i = 0; i < n; ++i) {
            double gx = 0.0, gy = 0.0;
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double q = Q[i * n + j];
                double mult = (lie * P[i * n + j] - q / z) * q;
                gx += mult * (emb.points[i][0] - emb.points[j][0]);
                gy += mult * (emb.points[i][1] - emb.points[j][1]);
            }
            grad[i] = {4.0 * gx, 4.0 * gy};
        }

        const double momentum = iter <= exaggeration_until ? 0.5 : 0.8;
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) {
                double& g = grad[i][c];
                double& v = velocity[i][c];
                double& gain = gains[i][c];
                gain = (g > 0) == (v > 0) ? std::max(gain * 0.8, 0.01) : gain + 0.2;
                v = momentum * v - eta * gain * g;
                emb.points[i][c] += v;
            }
        // keep the embedding centred
        double mx = 0, my = 0;
        for (auto& p : emb.points) {
            mx += p[0];
            my += p[1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (auto& p : emb.points) {
            p[0] -= mx;
            p[1] -= my;
        }

        // KL(P||Q) against the true (unexaggerated) P
        double kl = 0.0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double p = P[i * n + j];
                double q = std::max(Q[i * n + j] / z, 1e-12);
                kl += p * std::log(p / q);
            }
        emb.kl_trace.push_back(kl);
    }
    return emb;
}

double neighbor_purity(const std::vector<std::array<double, 2>>& points,
                       const std::vector<int>& labels, int k) {
    const size_t n = points.size();
    if (labels.size() != n) throw ShapeError("neighbor_purity: points vs labels mismatch");
    if (k < 1 || static_cast<size_t>(k) >= n)
        throw ConfigError("neighbor_purity: need n > k >= 1 (n=" + std::to_string(n) +
                          ", k=" + std::to_string(k) + ")");
    double total = 0.0;
    std::vector<std::pair<double, size_t>> dist(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double dx = points[i][0] - points[j][0];
            double dy = points[i][1] - points[j][1];
            dist[j] = {dx * dx + dy * dy, j};
        }
        dist[i].first = std::numeric_limits<double>::infinity();  // exclude self
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        int same = 0;
        for (int t = 0; t < k; ++t) same += labels[dist[t].second] == labels[i];
        total += static_cast<double>(same) / k;
    }
    return total / static_cast<double>(n);
}

void save_embedding_tsv(const Embedding2D& embedding, const std::vector<std::string>& ids,
                        const std::vector<std::string>& labels,
                        const std::filesystem::path& path) {
    if (ids.size() != embedding.points.size() || labels.size() != embedding.points.size())
        throw ShapeError("save_embedding_tsv: ids/labels/points size mismatch");
    TsvWriter out(path);
    out.row({"id", "x", "y", "label"});
    for (size_t i = 0; i < ids.size(); ++i)
        out.row({ids[i], fmt_g9(embedding.points[i][0]), fmt_g9(embedding.points[i][1]),
                 labels[i]});
    out.close();
}

}  // namespace illu
