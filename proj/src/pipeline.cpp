#include "illu/pipeline.hpp"

#include "illu/checkpoint.hpp"
#include "illu/parallel.hpp"
#include "illu/rng.hpp"
#include "illu/tsv.hpp"

namespace illu {

PredictionSet predict_with_net(const Network& net, const DatasetManifest& manifest,
                               const std::string& split) {
    auto records = manifest.split_records(split);
    if (records.empty()) throw DataError("predict: split '" + split + "' has no records");
    PredictionSet preds;
    preds.class_names = net.class_names;
    preds.items.resize(records.size());
    parallel_for(records.size(), [&](size_t i) {
        Tensor image = load_and_preprocess(manifest, *records[i], net.mean_rgb);
        BasicTensor<float> probs = softmax(forward_logits(net, image));
        Prediction p;
        p.id = records[i]->id;
        p.ranking = rank_classes(probs);
        preds.items[i] = std::move(p);
    });
    for (size_t i = 0; i < records.size(); ++i) {
        int idx = -1;
        for (size_t c = 0; c < net.class_names.size(); ++c)
            if (net.class_names[c] == records[i]->class_name) idx = static_cast<int>(c);
        if (idx < 0)
            throw DataError("predict: class '" + records[i]->class_name +
                            "' not among the model's classes");
        preds.items[i].true_class = idx;
    }
    return preds;
}

PredictionSet predict_with_svm(const SvmModel& model, const NeuralCodes& codes,
                               const DatasetManifest& manifest) {
    PredictionSet preds;
    preds.class_names = model.class_names;
    preds.items.resize(codes.count());
    auto labels = labels_for_codes(codes, manifest, model.class_names);
    parallel_for(codes.count(), [&](size_t i) {
        Prediction p;
        p.id = codes.ids[i];
        p.ranking = svm_rank_classes(model, {codes.row(i), codes.dim()});
        p.true_class = labels[i];
        preds.items[i] = std::move(p);
    });
    return preds;
}

namespace {

MetricsReport eval_and_write(const PredictionSet& preds, const std::filesystem::path& dir,
                             const std::string& stem) {
    save_predictions_tsv(preds, dir / ("preds_" + stem + ".tsv"));
    MetricsReport report = per_class_report(preds);
    save_report_tsv(report, dir / ("report_" + stem + ".tsv"));
    save_confusion_tsv(report, dir / ("confusion_" + stem + ".tsv"));
    return report;
}

void save_grid_tsv(const GridSearchResult& grid, const std::filesystem::path& path) {
    TsvWriter out(path);
    out.row({"kernel", "C", "gamma", "mean_top1"});
    for (const auto& e : grid.entries)
        out.row({kernel_name(e.cell.kernel.kind), fmt_g9(e.cell.C), fmt_g9(e.cell.kernel.gamma),
                 fmt_f2(e.mean_accuracy)});
    out.row({"best", kernel_name(grid.best.kernel.kind) + " C=" + fmt_g9(grid.best.C) +
                         " gamma=" + fmt_g9(grid.best.kernel.gamma),
             "", fmt_f2(grid.best_accuracy)});
    out.close();
}

// grid search on the train codes, final fit at the best cell
SvmModel fit_svm(const NeuralCodes& train_codes, const std::vector<int>& labels,
                 const std::vector<std::string>& class_names, const PipelineOptions& opts,
                 uint64_t seed, const std::filesystem::path& grid_out) {
    std::vector<GridCell> grid =
        opts.grid_file.empty() ? default_grid() : load_grid(opts.grid_file);
    GridSearchResult result = grid_search(train_codes.matrix, labels,
                                          static_cast<int>(class_names.size()), grid,
                                          opts.folds, seed);
    save_grid_tsv(result, grid_out);
    return train_ovr(train_codes.matrix, labels, class_names, result.best.kernel,
                     result.best.C);
}

}  // namespace

PipelineResult run_pipeline(const PipelineOptions& opts) {
    if (opts.out_dir.empty()) throw ConfigError("pipeline: output directory required");
    std::filesystem::create_directories(opts.out_dir);

    // 1. the two synthetic domains (shared geometry, shared split layout)
    SyntheticConfig gen;
    gen.num_classes = opts.classes;
    gen.per_class = opts.per_class;
    gen.side = opts.side;
    gen.seed = opts.seed;
    gen.label_noise = 0.0;
    gen.domain = Domain::natural;
    gen.out_dir = opts.out_dir / "natural";
    DatasetManifest natural = generate_synthetic(gen);
    gen.domain = Domain::illustration;
    gen.label_noise = opts.label_noise;
    gen.out_dir = opts.out_dir / "illustration";
    DatasetManifest illustration = generate_synthetic(gen);

    TrainConfig cfg;
    cfg.batch_size = opts.batch_size;
    cfg.patience = opts.patience;

    // 2. baseline trained from scratch on the natural domain
    auto mean_rgb = compute_mean_rgb(natural);
    const auto& classes = natural.class_names;
    LabeledImages nat_train = load_split(natural, "train", mean_rgb, classes);
    LabeledImages nat_val = load_split(natural, "val", mean_rgb, classes);

    cfg.seed = mix_seed(opts.seed, 0x747261696e);
    cfg.max_epochs = opts.scratch_epochs;
    ScaleConfig scale;
    scale.input_side = opts.side;
    auto [baseline, base_report] = train_from_scratch(scale, classes, nat_train, nat_val, cfg);
    baseline.mean_rgb = mean_rgb;
    save_checkpoint(baseline, opts.out_dir / "baseline.ckpt");
    save_report_tsv(base_report, opts.out_dir / "baseline_train_report.tsv");
    nat_train = {};
    nat_val = {};

    PipelineResult result;

    // 3. Baseline softmax on both test splits
    {
        auto preds = predict_with_net(baseline, illustration, "test");
        auto report = eval_and_write(preds, opts.out_dir, "baseline_illustration");
        result.baseline_illu_top1 = report.global_top1();
        result.baseline_illu_top5 = report.global_top5();
    }
    {
        auto preds = predict_with_net(baseline, natural, "test");
        auto report = eval_and_write(preds, opts.out_dir, "baseline_natural");
        result.baseline_natural_top1 = report.global_top1();
    }

    // 4-5. Baseline + SVM on illustration codes
    NeuralCodes base_train_codes = extract_neural_codes(baseline, illustration, "train");
    NeuralCodes base_test_codes = extract_neural_codes(baseline, illustration, "test");
    save_codes_tsv(base_train_codes, opts.out_dir / "codes_baseline_train.tsv");
    save_codes_tsv(base_test_codes, opts.out_dir / "codes_baseline_test.tsv");
    {
        auto labels = labels_for_codes(base_train_codes, illustration, classes);
        SvmModel svm = fit_svm(base_train_codes, labels, classes, opts,
                               mix_seed(opts.seed, 0x67726964, 1),
                               opts.out_dir / "grid_baseline.tsv");
        save_svm(svm, opts.out_dir / "svm_baseline.svm");
        auto preds = predict_with_svm(svm, base_test_codes, illustration);
        auto report = eval_and_write(preds, opts.out_dir, "baseline_svm_illustration");
        result.baseline_svm_illu_top1 = report.global_top1();
        result.baseline_svm_illu_top5 = report.global_top5();
    }

    // 6. adaptive-policy fine-tune on the illustration domain
    AdaptivePolicy policy =
        opts.policy_text.empty()
            ? AdaptivePolicy::paper_default(static_cast<int>(baseline.layers.size()))
            : AdaptivePolicy::parse(opts.policy_text, static_cast<int>(baseline.layers.size()));
    Network reset = apply_policy(baseline, policy, mix_seed(opts.seed, 0x706f6c69), classes);

    LabeledImages illu_train = load_split(illustration, "train", baseline.mean_rgb, classes);
    LabeledImages illu_val = load_split(illustration, "val", baseline.mean_rgb, classes);
    cfg.seed = mix_seed(opts.seed, 0x66696e65);
    cfg.max_epochs = opts.finetune_epochs;
    auto [optimized, ft_report] = finetune(reset, illu_train, illu_val, cfg, policy);
    save_checkpoint(optimized, opts.out_dir / "optimized.ckpt");
    save_report_tsv(ft_report, opts.out_dir / "finetune_report.tsv");
    illu_train = {};
    illu_val = {};

    // 7. Optimized softmax on both test splits
    {
        auto preds = predict_with_net(optimized, illustration, "test");
        auto report = eval_and_write(preds, opts.out_dir, "optimized_illustration");
        result.optimized_illu_top1 = report.global_top1();
        result.optimized_illu_top5 = report.global_top5();
    }
    {
        auto preds = predict_with_net(optimized, natural, "test");
        auto report = eval_and_write(preds, opts.out_dir, "optimized_natural");
        result.optimized_natural_top1 = report.global_top1();
    }

    // 8-9. Optimized + SVM
    NeuralCodes opt_train_codes = extract_neural_codes(optimized, illustration, "train");
    NeuralCodes opt_test_codes = extract_neural_codes(optimized, illustration, "test");
    save_codes_tsv(opt_train_codes, opts.out_dir / "codes_optimized_train.tsv");
    save_codes_tsv(opt_test_codes, opts.out_dir / "codes_optimized_test.tsv");
    {
        auto labels = labels_for_codes(opt_train_codes, illustration, classes);
        SvmModel svm = fit_svm(opt_train_codes, labels, classes, opts,
                               mix_seed(opts.seed, 0x67726964, 2),
                               opts.out_dir / "grid_optimized.tsv");
        save_svm(svm, opts.out_dir / "svm_optimized.svm");
        auto preds = predict_with_svm(svm, opt_test_codes, illustration);
        auto report = eval_and_write(preds, opts.out_dir, "optimized_svm_illustration");
        result.optimized_svm_illu_top1 = report.global_top1();
        result.optimized_svm_illu_top5 = report.global_top5();
    }

    // 10. t-SNE diagnostics on the illustration-test codes
    if (opts.run_tsne) {
        auto test_labels = labels_for_codes(base_test_codes, illustration, classes);
        std::vector<std::string> label_names;
        for (int l : test_labels) label_names.push_back(classes[l]);
        uint64_t tsne_seed = mix_seed(opts.seed, 0x74736e65);

        Embedding2D base_emb = tsne_embed(base_test_codes.matrix, opts.perplexity,
                                          opts.tsne_iterations, tsne_seed);
        save_embedding_tsv(base_emb, base_test_codes.ids, label_names,
                           opts.out_dir / "embedding_baseline.tsv");
        result.purity_baseline = neighbor_purity(base_emb.points, test_labels);

        auto opt_labels = labels_for_codes(opt_test_codes, illustration, classes);
        std::vector<std::string> opt_label_names;
        for (int l : opt_labels) opt_label_names.push_back(classes[l]);
        Embedding2D opt_emb = tsne_embed(opt_test_codes.matrix, opts.perplexity,
                                         opts.tsne_iterations, tsne_seed);
        save_embedding_tsv(opt_emb, opt_test_codes.ids, opt_label_names,
                           opts.out_dir / "embedding_optimized.tsv");
        result.purity_optimized = neighbor_purity(opt_emb.points, opt_labels);
        result.optimized_kl_trace = opt_emb.kl_trace;
    }

    save_comparison_tsv(result, opts.out_dir / "comparison.tsv");
    return result;
}

void save_comparison_tsv(const PipelineResult& r, const std::filesystem::path& path) {
    TsvWriter out(path);
    out.row({"model", "top1", "top5"});
    out.row({"Baseline", fmt_f2(r.baseline_illu_top1), fmt_f2(r.baseline_illu_top5)});
    out.row({"Baseline+SVM", fmt_f2(r.baseline_svm_illu_top1), fmt_f2(r.baseline_svm_illu_top5)});
    out.row({"Optimized", fmt_f2(r.optimized_illu_top1), fmt_f2(r.optimized_illu_top5)});
    out.row({"Optimized+SVM", fmt_f2(r.optimized_svm_illu_top1),
             fmt_f2(r.optimized_svm_illu_top5)});
    out.close();
}

}  // namespace illu
