#include "illu/codes.hpp"

#include <unordered_map>

#include "illu/parallel.hpp"
#include "illu/tsv.hpp"

namespace illu {

NeuralCodes extract_neural_codes(const Network& net, const DatasetManifest& manifest,
                                 const std::string& split) {
    auto records = manifest.split_records(split);
    if (records.empty())
        throw DataError("extract_neural_codes: split '" + split + "' has no records");
    const size_t d = static_cast<size_t>(net.scale.fc2);
    NeuralCodes codes;
    codes.matrix = Tensor({records.size(), d});
    codes.ids.resize(records.size());
    parallel_for(records.size(), [&](size_t i) {
        Tensor image = load_and_preprocess(manifest, *records[i], net.mean_rgb);
        Tensor code = neural_code(net, image);
        std::copy_n(code.data(), d, codes.matrix.data() + i * d);
        codes.ids[i] = records[i]->id;
    });
    return codes;
}

void save_codes_tsv(const NeuralCodes& codes, const std::filesystem::path& path) {
    TsvWriter out(path);
    const size_t d = codes.dim();
    for (size_t i = 0; i < codes.count(); ++i) {
        std::vector<std::string> cells;
        cells.reserve(d + 1);
        cells.push_back(codes.ids[i]);
        const float* row = codes.row(i);
        for (size_t j = 0; j < d; ++j) cells.push_back(fmt_g9(row[j]));
        out.row(cells);
    }
    out.close();
}

NeuralCodes load_codes_tsv(const std::filesystem::path& path) {
    auto rows = read_tsv(path);
    if (rows.empty()) throw DataError("codes file is empty: " + path.string());
    const size_t d = rows[0].size() - 1;
    if (d == 0) throw DataError("codes file has no value columns: " + path.string());
    NeuralCodes codes;
    codes.matrix = Tensor({rows.size(), d});
    codes.ids.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d + 1)
            throw DataError("codes file row " + std::to_string(i + 1) +
                            " has inconsistent width: " + path.string());
        codes.ids.push_back(rows[i][0]);
        for (size_t j = 0; j < d; ++j)
            codes.matrix[i * d + j] =
                static_cast<float>(parse_double(rows[i][j + 1], "code value"));
    }
    return codes;
}

std::vector<int> labels_for_codes(const NeuralCodes& codes, const DatasetManifest& manifest,
                                  const std::vector<std::string>& class_order) {
    std::unordered_map<std::string, const ManifestRecord*> by_id;
    for (const auto& r : manifest.records) by_id[r.id] = &r;
    std::vector<int> labels;
    labels.reserve(codes.count());
    for (const auto& id : codes.ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError("labels_for_codes: id '" + id + "' not in manifest");
        auto pos = std::find(class_order.begin(), class_order.end(), it->second->class_name);
        if (pos == class_order.end())
            throw DataError("labels_for_codes: class '" + it->second->class_name +
                            "' not in class list");
        labels.push_back(static_cast<int>(pos - class_order.begin()));
    }
    return labels;
}

}  // namespace illu
