#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "illu/dataset.hpp"
#include "illu/net.hpp"

namespace illu {

// Fixed-width image descriptors: one row per image, fc2's post-relu
// activation in eval mode.
struct NeuralCodes {
    Tensor matrix;  // [n_images, fc2_dim]
    std::vector<std::string> ids;

    size_t count() const { return ids.size(); }
    size_t dim() const { return matrix.rank() == 2 ? matrix.dim(1) : 0; }
    const float* row(size_t i) const { return matrix.data() + i * dim(); }
};

NeuralCodes extract_neural_codes(const Network& net, const DatasetManifest& manifest,
                                 const std::string& split);

// TSV: column 1 the image id, columns 2..D+1 the code values with 9
// significant digits.
void save_codes_tsv(const NeuralCodes& codes, const std::filesystem::path& path);
NeuralCodes load_codes_tsv(const std::filesystem::path& path);

// labels for code rows, by manifest lookup; indexes into class_order
std::vector<int> labels_for_codes(const NeuralCodes& codes, const DatasetManifest& manifest,
                                  const std::vector<std::string>& class_order);

}  // namespace illu
