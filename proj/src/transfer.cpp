#include "illu/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "illu/parallel.hpp"
#include "illu/tsv.hpp"

namespace illu {

AdaptivePolicy AdaptivePolicy::uniform(int layer_count, float lr) {
    AdaptivePolicy p;
    for (int i = 1; i <= layer_count; ++i) p.lr_map[i] = lr;
    return p;
}

AdaptivePolicy AdaptivePolicy::paper_default(int layer_count, float lr_reset, float lr_keep) {
    AdaptivePolicy p;
    for (int i = 1; i <= layer_count; ++i) {
        bool reset = (i <= 10) || (i >= 17);
        if (reset) p.reset_layers.insert(i);
        p.lr_map[i] = reset ? lr_reset : lr_keep;
    }
    return p;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::set<int> parse_ranges(const std::string& text) {
    std::set<int> out;
    if (trim(text).empty()) return out;
    size_t start = 0;
    while (start <= text.size()) {
        size_t comma = text.find(',', start);
        std::string part = trim(text.substr(start, comma - start));
        if (!part.empty()) {
            size_t dash = part.find('-');
            if (dash == std::string::npos) {
                out.insert(static_cast<int>(parse_long(part, "layer index")));
            } else {
                int lo = static_cast<int>(parse_long(trim(part.substr(0, dash)), "layer range"));
                int hi = static_cast<int>(parse_long(trim(part.substr(dash + 1)), "layer range"));
                if (lo > hi) throw ConfigError("policy: bad layer range '" + part + "'");
                for (int i = lo; i <= hi; ++i) out.insert(i);
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

AdaptivePolicy AdaptivePolicy::parse(const std::string& text, int layer_count) {
    std::set<int> reset;
    double lr_reset = 1e-2, lr_keep = 1e-4;
    bool saw_reset = false;

    size_t start = 0;
    while (start <= text.size()) {
        size_t semi = text.find(';', start);
        std::string part = trim(text.substr(start, semi - start));
        if (!part.empty()) {
            size_t eq = part.find('=');
            if (eq == std::string::npos)
                throw ConfigError("policy: expected key=value, got '" + part + "'");
            std::string key = trim(part.substr(0, eq));
            std::string value = trim(part.substr(eq + 1));
            if (key == "reset") {
                reset = parse_ranges(value);
                saw_reset = true;
            } else if (key == "lr.reset") {
                lr_reset = parse_double(value, "lr.reset");
            } else if (key == "lr.keep") {
                lr_keep = parse_double(value, "lr.keep");
            } else {
                throw ConfigError("policy: unknown key '" + key + "'");
            }
        }
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    if (!saw_reset) throw ConfigError("policy: missing 'reset=' entry");
    if (lr_reset < 0 || lr_keep < 0) throw ConfigError("policy: learning rates must be >= 0");

    AdaptivePolicy p;
    p.reset_layers = std::move(reset);
    for (int i = 1; i <= layer_count; ++i)
        p.lr_map[i] = p.reset_layers.count(i) ? static_cast<float>(lr_reset)
                                              : static_cast<float>(lr_keep);
    p.validate(layer_count);
    return p;
}

std::string AdaptivePolicy::to_text() const {
    std::string reset;
    int run_start = 0, prev = 0;
    auto flush = [&]() {
        if (run_start == 0) return;
        if (!reset.empty()) reset += ",";
        reset += std::to_string(run_start);
        if (prev != run_start) reset += "-" + std::to_string(prev);
    };
    for (int i : reset_layers) {
        if (run_start == 0) {
            run_start = prev = i;
        } else if (i == prev + 1) {
            prev = i;
        } else {
            flush();
            run_start = prev = i;
        }
    }
    flush();
    float lr_reset = 0.f, lr_keep = 0.f;
    for (auto& [layer, lr] : lr_map)
        (reset_layers.count(layer) ? lr_reset : lr_keep) = lr;
    char buf[128];
    std::snprintf(buf, sizeof buf, "reset=%s; lr.reset=%g; lr.keep=%g", reset.c_str(),
                  static_cast<double>(lr_reset), static_cast<double>(lr_keep));
    return buf;
}

void AdaptivePolicy::validate(int layer_count) const {
    for (int i = 1; i <= layer_count; ++i)
        if (!lr_map.count(i))
            throw ConfigError("policy: lr_map missing layer " + std::to_string(i));
    for (int i : reset_layers)
        if (i < 1 || i > layer_count)
            throw ConfigError("policy: reset layer " + std::to_string(i) + " out of range 1.." +
                              std::to_string(layer_count));
}

Network apply_policy(const Network& net, const AdaptivePolicy& policy, uint64_t seed,
                     const std::vector<std::string>& new_class_names) {
    policy.validate(static_cast<int>(net.layers.size()));
    const int classifier = static_cast<int>(net.layers.size());
    Network out = net;

    if (!new_class_names.empty() && new_class_names != net.class_names) {
        if (!policy.reset_layers.count(classifier))
            throw ConfigError("apply_policy: changing the class count requires resetting the "
                              "classifier layer " +
                              std::to_string(classifier));
        if (new_class_names.size() < 2)
            throw ConfigError("apply_policy: need at least 2 classes");
        out.class_names = new_class_names;
        auto& fc3 = out.layers.back();
        fc3.weight = Tensor({new_class_names.size(), fc3.weight.dim(1)});
        fc3.bias = Tensor({new_class_names.size()});
    }

    Rng rng(mix_seed(seed, 0x7265736574));  // reset stream
    for (auto& layer : out.layers)
        if (policy.reset_layers.count(layer.index)) init_layer(layer, rng);
    return out;
}

double top1_accuracy(const Network& net, const LabeledImages& data) {
    if (data.images.empty()) throw DataError("top1_accuracy: empty split");
    std::vector<uint8_t> hit(data.images.size(), 0);
    parallel_for(data.images.size(), [&](size_t i) {
        BasicTensor<float> logits = forward_logits(net, data.images[i]);
        int best = 0;
        for (size_t k = 1; k < logits.size(); ++k)
            if (logits[k] > logits[best]) best = static_cast<int>(k);
        hit[i] = best == data.labels[i];
    });
    size_t hits = std::accumulate(hit.begin(), hit.end(), size_t{0});
    return 100.0 * static_cast<double>(hits) / static_cast<double>(data.images.size());
}

namespace {

std::pair<Network, FinetuneReport> run_training(Network net, const LabeledImages& train,
                                                const LabeledImages& val, const TrainConfig& cfg,
                                                const std::map<int, float>& lr_map) {
    cfg.validate();
    if (train.images.empty()) throw DataError("training split is empty");
    if (val.images.empty()) throw DataError("validation split is empty");
    for (int label : train.labels)
        if (label < 0 || label >= net.num_classes())
            throw DataError("training label out of range for the model's classes");

    FinetuneReport report;
    report.initial_val_top1 = top1_accuracy(net, val);

    Network best = net;
    double best_val = report.initial_val_top1;
    int best_epoch = 0;
    int since_best = 0;

    Gradients<float> grads;
    Velocity<float> velocity;  // fresh optimizer state per run
    Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566));
    uint64_t batch_counter = 0;

    std::vector<size_t> order(train.images.size());
    std::iota(order.begin(), order.end(), size_t{0});

    int epoch = 1;
    for (; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t ofs = 0; ofs < order.size(); ofs += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(order.size(), ofs + static_cast<size_t>(cfg.batch_size));
            std::vector<const Tensor*> images;
            std::vector<int> labels;
            images.reserve(hi - ofs);
            for (size_t k = ofs; k < hi; ++k) {
                images.push_back(&train.images[order[k]]);
                labels.push_back(train.labels[order[k]]);
            }
            const uint64_t batch_seed = mix_seed(cfg.seed, 0x62617463, batch_counter++);
            double loss = backprop(net, images, labels, RunMode::train, cfg.dropout_p,
                                   batch_seed, grads);
            if (!std::isfinite(loss))
                throw NumericError("training loss is not finite at epoch " +
                                   std::to_string(epoch));
            sgd_step(net, grads, lr_map, cfg, velocity);
            loss_sum += loss * static_cast<double>(hi - ofs);
            seen += hi - ofs;
        }
        const double train_loss = loss_sum / static_cast<double>(seen);
        const double val_top1 = top1_accuracy(net, val);
        report.epochs.push_back({epoch, train_loss, val_top1});

        if (val_top1 > best_val) {
            best_val = val_top1;
            best = net;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.stop_reason = "converged";
            break;
        }
    }
    report.epochs_run = static_cast<int>(report.epochs.size());
    report.best_epoch = best_epoch;
    if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
    return {std::move(best), std::move(report)};
}

}  // namespace

std::pair<Network, FinetuneReport> finetune(const Network& net, const LabeledImages& train,
                                            const LabeledImages& val, const TrainConfig& cfg,
                                            const AdaptivePolicy& policy) {
    policy.validate(static_cast<int>(net.layers.size()));
    return run_training(net, train, val, cfg, policy.lr_map);
}

std::pair<Network, FinetuneReport> train_from_scratch(const ScaleConfig& scale,
                                                      const std::vector<std::string>& class_names,
                                                      const LabeledImages& train,
                                                      const LabeledImages& val,
                                                      const TrainConfig& cfg) {
    Network net = build_network<float>(scale, class_names, cfg.seed);
    auto policy = AdaptivePolicy::uniform(static_cast<int>(net.layers.size()), cfg.base_lr);
    return run_training(std::move(net), train, val, cfg, policy.lr_map);
}

void save_report_tsv(const FinetuneReport& report, const std::filesystem::path& path) {
    TsvWriter out(path);
    out.row({"epoch", "train_loss", "val_top1"});
    out.row({"0", "-", fmt_f2(report.initial_val_top1)});
    for (const auto& e : report.epochs)
        out.row({std::to_string(e.epoch), fmt_g9(e.train_loss), fmt_f2(e.val_top1)});
    out.close();
}

}  // namespace illu
