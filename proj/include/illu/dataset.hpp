#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "illu/image.hpp"
#include "illu/tensor.hpp"

namespace illu {

struct ManifestRecord {
    std::string id;
    std::string path;  // relative to the manifest's directory
    std::string class_name;
    std::string split;  // train | val | test
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::vector<std::string> class_names;  // ordered
    std::filesystem::path base_dir;

    int class_index(const std::string& name) const;
    std::vector<const ManifestRecord*> split_records(const std::string& split) const;
};

// TSV with header id/path/class/split, LF line endings, paths relative to
// the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---- name-to-class mapping ----

const std::unordered_set<std::string>& default_stopwords();
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

// Lowercases, splits on '-', '_', ' ', '.' and digit runs, drops a trailing
// image-file-extension token, removes stopwords, dedupes preserving order.
std::vector<std::string> tokenize_name(const std::string& name,
                                       const std::unordered_set<std::string>& stopwords);

struct ClassMapping {
    // one entry per input image name, in input order
    std::vector<std::pair<std::string, std::vector<std::string>>> matches;
    std::vector<std::string> unmatched;

    std::vector<std::string> multi_matched() const;
};

// An image matches a class iff their token sets intersect; an image may
// match several classes.
ClassMapping map_to_classes(const std::vector<std::string>& image_names,
                            const std::vector<std::string>& class_names,
                            const std::unordered_set<std::string>& stopwords);

// ---- splits ----

// Stratified per class: val and test take the rounded fractions, the
// remainder goes to train. Seed-deterministic, disjoint and exhaustive.
DatasetManifest split_manifest(std::vector<ManifestRecord> records,
                               std::vector<std::string> class_names,
                               std::array<double, 3> fractions /*train,val,test*/, uint64_t seed);

// ---- synthetic two-domain generator ----

enum class Domain { natural, illustration };

std::string domain_name(Domain d);
Domain parse_domain(const std::string& s);

enum class ShapeKind { disk, triangle, cross, ring, bar, star, diamond, hexagon };
constexpr int kShapeKindCount = 8;

const std::vector<std::string>& shape_kind_names();

struct SyntheticConfig {
    int num_classes = 6;  // first N shape kinds
    int per_class = 200;
    int side = 64;  // multiple of 32
    Domain domain = Domain::natural;
    double label_noise = 0.0;  // fraction of train labels reassigned uniformly
    uint64_t seed = 1;
    std::array<double, 3> fractions{0.64, 0.16, 0.20};
    std::filesystem::path out_dir;
};

struct ShapeGeometry {
    ShapeKind kind = ShapeKind::disk;
    double cx = 0, cy = 0;  // pixels
    double radius = 0;      // pixels
    double angle = 0;       // radians
};

// Geometry depends on (seed, class, image) but not the domain, so the two
// domains render identical shape masks for the same seed.
ShapeGeometry sample_geometry(uint64_t seed, int class_idx, ShapeKind kind, int image_idx,
                              int side);

// signed distance to the shape boundary in pixel units, negative inside
double shape_sdf(const ShapeGeometry& g, double px, double py);

std::vector<uint8_t> shape_mask(const ShapeGeometry& g, int side);

Image render_shape(Domain domain, const ShapeGeometry& g, int side, uint64_t appearance_seed);

// Renders images to out_dir/images/, writes out_dir/manifest.tsv, returns
// the manifest. All randomness flows from config.seed.
DatasetManifest generate_synthetic(const SyntheticConfig& config);

// ---- preprocessing ----

// Per-channel mean over the training split, pixels scaled to [0,1].
std::array<float, 3> compute_mean_rgb(const DatasetManifest& manifest);

// [0,1]-scaled, mean-subtracted [3,H,W] tensor.
Tensor preprocess(const Image& img, const std::array<float, 3>& mean_rgb);

Tensor load_and_preprocess(const DatasetManifest& manifest, const ManifestRecord& record,
                           const std::array<float, 3>& mean_rgb);

struct LabeledImages {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<std::string> ids;
};

// Loads and preprocesses one split; labels index into class_order.
LabeledImages load_split(const DatasetManifest& manifest, const std::string& split,
                         const std::array<float, 3>& mean_rgb,
                         const std::vector<std::string>& class_order);

}  // namespace illu
