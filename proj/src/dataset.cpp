#include "illu/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "illu/parallel.hpp"
#include "illu/rng.hpp"
#include "illu/tsv.hpp"

namespace illu {

namespace {

constexpr uint64_t kGeomStream = 0x67656f6d;    // geometry, shared by both domains
constexpr uint64_t kLooksStream = 0x6c6f6f6b;   // appearance
constexpr uint64_t kSplitStream = 0x73706c69;   // split assignment
constexpr uint64_t kNoiseStream = 0x6e6f6973;   // label noise

const std::unordered_set<std::string> kImageExtensions{"png", "jpg",  "jpeg", "svg", "gif",
                                                       "bmp", "webp", "tif",  "tiff"};

// fixed English stopword list; override with a one-word-per-line file
const char* kStopwords[] = {
    "a",     "about", "above", "after",  "again",   "all",   "am",    "an",    "and",   "any",
    "are",   "as",    "at",    "be",     "because", "been",  "before", "being", "below", "between",
    "both",  "but",   "by",    "can",    "could",   "did",   "do",     "does",  "doing", "down",
    "during", "each",  "few",   "for",    "from",    "further", "had",  "has",   "have",  "having",
    "he",    "her",   "here",  "hers",   "him",     "his",   "how",   "i",     "if",    "in",
    "into",  "is",    "it",    "its",    "itself",  "just",  "me",    "more",  "most",  "my",
    "no",    "nor",   "not",   "now",    "of",      "off",   "on",    "once",  "only",  "or",
    "other", "our",   "ours",  "out",    "over",    "own",   "same",  "she",   "should", "so",
    "some",  "such",  "than",  "that",   "the",     "their", "theirs", "them", "then",  "there",
    "these", "they",  "this",  "those",  "through", "to",    "too",   "under", "until", "up",
    "very",  "was",   "we",    "were",   "what",    "when",  "where", "which", "while", "who",
    "whom",  "why",   "will",  "with",   "you",     "your",  "yours"};

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    double i = std::floor(h * 6.0);
    double f = h * 6.0 - i;
    double p = v * (1.0 - s);
    double q = v * (1.0 - f * s);
    double t = v * (1.0 - (1.0 - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

uint8_t quantize(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// ---- signed distance functions, unit scale, negative inside ----

double sd_disk(double x, double y) { return std::hypot(x, y) - 1.0; }

double sd_ring(double x, double y) { return std::abs(std::hypot(x, y) - 0.72) - 0.28; }

double sd_box(double x, double y, double hx, double hy) {
    double dx = std::abs(x) - hx, dy = std::abs(y) - hy;
    double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0);
    return std::hypot(ox, oy) + std::min(std::max(dx, dy), 0.0);
}

double sd_bar(double x, double y) { return sd_box(x, y, 1.0, 0.34); }

double sd_cross(double x, double y) {
    return std::min(sd_box(x, y, 1.0, 0.32), sd_box(x, y, 0.32, 1.0));
}

double sd_diamond(double x, double y) { return (std::abs(x) + std::abs(y) - 1.0) / std::sqrt(2.0); }

double sd_triangle(double x, double y) {
    // equilateral triangle, circumradius 1
    const double k = std::sqrt(3.0);
    const double r = 0.85;
    x = std::abs(x) - r;
    y = y + r / k;
    if (x + k * y > 0.0) {
        double nx = (x - k * y) / 2.0;
        double ny = (-k * x - y) / 2.0;
        x = nx;
        y = ny;
    }
    x -= std::clamp(x, -2.0 * r, 0.0);
    return -std::hypot(x, y) * (y > 0 ? 1.0 : (y < 0 ? -1.0 : 0.0));
}

double sd_hexagon(double x, double y) {
    const double kx = -0.866025404, ky = 0.5, kz = 0.577350269;
    const double r = 0.9;
    x = std::abs(x);
    y = std::abs(y);
    double d = 2.0 * std::min(kx * x + ky * y, 0.0);
    x -= d * kx;
    y -= d * ky;
    x -= std::clamp(x, -kz * r, kz * r);
    y -= r;
    return std::hypot(x, y) * (y > 0 ? 1.0 : (y < 0 ? -1.0 : 0.0));
}

double sd_star(double x, double y) {
    // five-point star, outer radius 1, inner ratio 0.45
    const double r = 1.0, rf = 0.45;
    const double k1x = 0.809016994, k1y = -0.587785252;
    const double k2x = -k1x, k2y = k1y;
    x = std::abs(x);
    double d1 = 2.0 * std::max(k1x * x + k1y * y, 0.0);
    x -= d1 * k1x;
    y -= d1 * k1y;
    double d2 = 2.0 * std::max(k2x * x + k2y * y, 0.0);
    x -= d2 * k2x;
    y -= d2 * k2y;
    x = std::abs(x);
    y -= r;
    double bax = rf * (-k1y) - 0.0, bay = rf * k1x - 1.0;
    double h = std::clamp((x * bax + y * bay) / (bax * bax + bay * bay), 0.0, r);
    double px = x - bax * h, py = y - bay * h;
    double cross = y * bax - x * bay;
    return std::hypot(px, py) * (cross > 0 ? 1.0 : (cross < 0 ? -1.0 : 0.0));
}

double sd_kind(ShapeKind kind, double x, double y) {
    switch (kind) {
        case ShapeKind::disk: return sd_disk(x, y);
        case ShapeKind::triangle: return sd_triangle(x, y);
        case ShapeKind::cross: return sd_cross(x, y);
        case ShapeKind::ring: return sd_ring(x, y);
        case ShapeKind::bar: return sd_bar(x, y);
        case ShapeKind::star: return sd_star(x, y);
        case ShapeKind::diamond: return sd_diamond(x, y);
        case ShapeKind::hexagon: return sd_hexagon(x, y);
    }
    throw ConfigError("unknown shape kind");
}

}  // namespace

int DatasetManifest::class_index(const std::string& name) const {
    for (size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<const ManifestRecord*> DatasetManifest::split_records(const std::string& split) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
        if (r.split == split) out.push_back(&r);
    return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    auto rows = read_tsv(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"id", "path", "class", "split"})
        throw DataError("manifest " + path.string() + " missing id/path/class/split header");
    DatasetManifest m;
    m.base_dir = path.parent_path();
    std::unordered_set<std::string> seen_ids;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4)
            throw DataError("manifest " + path.string() + " row " + std::to_string(i + 1) +
                            " has " + std::to_string(rows[i].size()) + " columns, expected 4");
        ManifestRecord r{rows[i][0], rows[i][1], rows[i][2], rows[i][3]};
        if (r.split != "train" && r.split != "val" && r.split != "test")
            throw DataError("manifest " + path.string() + ": unknown split '" + r.split + "'");
        if (!seen_ids.insert(r.id).second)
            throw DataError("manifest " + path.string() + ": duplicate id '" + r.id + "'");
        if (m.class_index(r.class_name) < 0) m.class_names.push_back(r.class_name);
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    TsvWriter out(path);
    out.row({"id", "path", "class", "split"});
    for (const auto& r : manifest.records) out.row({r.id, r.path, r.class_name, r.split});
    out.close();
}

const std::unordered_set<std::string>& default_stopwords() {
    static const std::unordered_set<std::string> set(std::begin(kStopwords),
                                                     std::end(kStopwords));
    return set;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword file " + path.string());
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

std::vector<std::string> tokenize_name(const std::string& name,
                                       const std::unordered_set<std::string>& stopwords) {
    std::vector<std::string> raw;
    std::string cur;
    bool saw_dot = false;
    for (char ch : name) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c == '-' || c == '_' || c == ' ' || c == '.' || std::isdigit(c)) {
            if (c == '.') saw_dot = true;
            if (!cur.empty()) raw.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) raw.push_back(std::move(cur));

    if (saw_dot && !raw.empty() && kImageExtensions.count(raw.back())) raw.pop_back();

    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& t : raw) {
        if (stopwords.count(t)) continue;
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

std::vector<std::string> ClassMapping::multi_matched() const {
    std::vector<std::string> out;
    for (const auto& [name, classes] : matches)
        if (classes.size() > 1) out.push_back(name);
    return out;
}

ClassMapping map_to_classes(const std::vector<std::string>& image_names,
                            const std::vector<std::string>& class_names,
                            const std::unordered_set<std::string>& stopwords) {
    if (class_names.empty()) throw ConfigError("map_to_classes: class names must be non-empty");
    std::vector<std::unordered_set<std::string>> class_tokens;
    class_tokens.reserve(class_names.size());
    for (const auto& cn : class_names) {
        auto toks = tokenize_name(cn, stopwords);
        class_tokens.emplace_back(toks.begin(), toks.end());
    }
    ClassMapping mapping;
    for (const auto& name : image_names) {
        auto toks = tokenize_name(name, stopwords);
        std::vector<std::string> hit;
        for (size_t c = 0; c < class_names.size(); ++c) {
            for (const auto& t : toks) {
                if (class_tokens[c].count(t)) {
                    hit.push_back(class_names[c]);
                    break;
                }
            }
        }
        if (hit.empty()) mapping.unmatched.push_back(name);
        mapping.matches.emplace_back(name, std::move(hit));
    }
    return mapping;
}

DatasetManifest split_manifest(std::vector<ManifestRecord> records,
                               std::vector<std::string> class_names,
                               std::array<double, 3> fractions, uint64_t seed) {
    for (double f : fractions)
        if (f <= 0.0) throw ConfigError("split fractions must be positive");
    if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");

    std::vector<std::vector<size_t>> per_class(class_names.size());
    for (size_t i = 0; i < records.size(); ++i) {
        bool found = false;
        for (size_t c = 0; c < class_names.size(); ++c)
            if (records[i].class_name == class_names[c]) {
                per_class[c].push_back(i);
                found = true;
                break;
            }
        if (!found)
            throw DataError("split_manifest: record class '" + records[i].class_name +
                            "' not in class list");
    }

    for (size_t c = 0; c < class_names.size(); ++c) {
        auto& idx = per_class[c];
        const size_t n = idx.size();
        if (n < 3)
            throw DataError("split_manifest: class '" + class_names[c] + "' has " +
                            std::to_string(n) + " records; need at least 3");
        const size_t n_val = static_cast<size_t>(std::llround(double(n) * fractions[1]));
        const size_t n_test = static_cast<size_t>(std::llround(double(n) * fractions[2]));
        if (n_val + n_test > n)
            throw DataError("split_manifest: class '" + class_names[c] +
                            "' too small for the requested fractions");
        const size_t n_train = n - n_val - n_test;
        Rng rng(mix_seed(seed, kSplitStream, c));
        rng.shuffle(idx);
        for (size_t k = 0; k < n; ++k) {
            const char* split = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
            records[idx[k]].split = split;
        }
    }

    DatasetManifest m;
    m.records = std::move(records);
    m.class_names = std::move(class_names);
    return m;
}

std::string domain_name(Domain d) { return d == Domain::natural ? "natural" : "illustration"; }

Domain parse_domain(const std::string& s) {
    if (s == "natural") return Domain::natural;
    if (s == "illustration") return Domain::illustration;
    throw ConfigError("unknown domain '" + s + "' (expected natural or illustration)");
}

const std::vector<std::string>& shape_kind_names() {
    static const std::vector<std::string> names{"disk", "triangle", "cross",   "ring",
                                                "bar",  "star",     "diamond", "hexagon"};
    return names;
}

ShapeGeometry sample_geometry(uint64_t seed, int class_idx, ShapeKind kind, int image_idx,
                              int side) {
    Rng rng(mix_seed(seed, kGeomStream, static_cast<uint64_t>(class_idx),
                     static_cast<uint64_t>(image_idx)));
    ShapeGeometry g;
    g.kind = kind;
    g.radius = side * rng.uniform(0.26, 0.40);
    g.cx = side * 0.5 + side * rng.uniform(-0.07, 0.07);
    g.cy = side * 0.5 + side * rng.uniform(-0.07, 0.07);
    g.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return g;
}

double shape_sdf(const ShapeGeometry& g, double px, double py) {
    const double dx = px - g.cx, dy = py - g.cy;
    const double ca = std::cos(-g.angle), sa = std::sin(-g.angle);
    const double lx = (dx * ca - dy * sa) / g.radius;
    const double ly = (dx * sa + dy * ca) / g.radius;
    return sd_kind(g.kind, lx, ly) * g.radius;
}

std::vector<uint8_t> shape_mask(const ShapeGeometry& g, int side) {
    std::vector<uint8_t> mask(static_cast<size_t>(side) * side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            mask[static_cast<size_t>(y) * side + x] = shape_sdf(g, x + 0.5, y + 0.5) < 0.0;
    return mask;
}

Image render_shape(Domain domain, const ShapeGeometry& g, int side, uint64_t appearance_seed) {
    Rng ar(appearance_seed);
    Image img;
    img.width = img.height = side;
    img.rgb.resize(static_cast<size_t>(side) * side * 3);

    if (domain == Domain::natural) {
        // textured fill over a radial background gradient, soft edges,
        // per-pixel gaussian noise
        Rgb bg1{ar.uniform(0.25, 0.70), ar.uniform(0.25, 0.70), ar.uniform(0.25, 0.70)};
        Rgb bg2{ar.uniform(0.25, 0.70), ar.uniform(0.25, 0.70), ar.uniform(0.25, 0.70)};
        double gx = ar.uniform(0.0, side), gy = ar.uniform(0.0, side);
        double gr = side * ar.uniform(0.8, 1.3);
        Rgb fill = hsv_to_rgb(ar.uniform(), ar.uniform(0.25, 0.75), ar.uniform(0.45, 0.95));
        double phi = ar.uniform(0.0, 2.0 * std::numbers::pi);
        const double lx = std::cos(phi), ly = std::sin(phi);
        const double noise_sigma = 0.06;
        const double edge_soft = 2.2;  // pixels

        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                double d = shape_sdf(g, x + 0.5, y + 0.5);
                double t = clamp01(std::hypot(x - gx, y - gy) / gr);
                Rgb bg{bg1.r + (bg2.r - bg1.r) * t, bg1.g + (bg2.g - bg1.g) * t,
                       bg1.b + (bg2.b - bg1.b) * t};
                double cov = clamp01(0.5 - d / edge_soft);
                double shade = 1.0 + 0.28 * std::clamp(((x - g.cx) * lx + (y - g.cy) * ly) /
                                                           g.radius, -1.0, 1.0);
                Rgb c{bg.r + (fill.r * shade - bg.r) * cov, bg.g + (fill.g * shade - bg.g) * cov,
                      bg.b + (fill.b * shade - bg.b) * cov};
                uint8_t* px = img.pixel(x, y);
                px[0] = quantize(c.r + noise_sigma * ar.normal());
                px[1] = quantize(c.g + noise_sigma * ar.normal());
                px[2] = quantize(c.b + noise_sigma * ar.normal());
            }
    } else {
        // flat saturated fill, hard dark outline, white background
        Rgb fill = hsv_to_rgb(ar.uniform(), ar.uniform(0.70, 1.0), ar.uniform(0.75, 1.0));
        Rgb outline{fill.r * 0.22, fill.g * 0.22, fill.b * 0.22};
        const double outline_w = 1.1;  // pixels

        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                double d = shape_sdf(g, x + 0.5, y + 0.5);
                Rgb c{1.0, 1.0, 1.0};
                if (std::abs(d) <= outline_w)
                    c = outline;
                else if (d < 0.0)
                    c = fill;
                uint8_t* px = img.pixel(x, y);
                px[0] = quantize(c.r);
                px[1] = quantize(c.g);
                px[2] = quantize(c.b);
            }
    }
    return img;
}

DatasetManifest generate_synthetic(const SyntheticConfig& config) {
    if (config.side <= 0 || config.side % 32 != 0)
        throw ConfigError("synthetic: side " + std::to_string(config.side) +
                          " not divisible by 32");
    if (config.num_classes < 2 || config.num_classes > kShapeKindCount)
        throw ConfigError("synthetic: num_classes must be in 2.." +
                          std::to_string(kShapeKindCount));
    if (config.per_class < 3) throw ConfigError("synthetic: need at least 3 images per class");
    if (config.label_noise < 0.0 || config.label_noise > 1.0)
        throw ConfigError("synthetic: label_noise must be in [0,1]");

    std::error_code ec;
    std::filesystem::create_directories(config.out_dir / "images", ec);
    if (ec)
        throw DataError("cannot create output directory " +
                        (config.out_dir / "images").string() + ": " + ec.message());

    std::vector<std::string> classes(shape_kind_names().begin(),
                                     shape_kind_names().begin() + config.num_classes);
    const uint64_t domain_tag = config.domain == Domain::natural ? 1 : 2;

    std::vector<ManifestRecord> records;
    records.reserve(static_cast<size_t>(config.num_classes) * config.per_class);
    for (int c = 0; c < config.num_classes; ++c)
        for (int i = 0; i < config.per_class; ++i) {
            char idx[16];
            std::snprintf(idx, sizeof idx, "%04d", i);
            ManifestRecord r;
            r.id = domain_name(config.domain) + "-" + classes[c] + "-" + idx;
            r.path = "images/" + classes[c] + "-" + idx + ".png";
            r.class_name = classes[c];
            records.push_back(std::move(r));
        }

    parallel_for(records.size(), [&](size_t k) {
        const int c = static_cast<int>(k) / config.per_class;
        const int i = static_cast<int>(k) % config.per_class;
        ShapeGeometry geo = sample_geometry(config.seed, c, static_cast<ShapeKind>(c), i,
                                            config.side);
        uint64_t looks = mix_seed(config.seed, kLooksStream,
                                  domain_tag * 1000003ull + static_cast<uint64_t>(c),
                                  static_cast<uint64_t>(i));
        Image img = render_shape(config.domain, geo, config.side, looks);
        write_png(config.out_dir / records[k].path, img);
    });

    // split uses a domain-independent stream so image i lands in the same
    // split in both domains
    DatasetManifest manifest =
        split_manifest(std::move(records), classes, config.fractions, config.seed);
    manifest.base_dir = config.out_dir;

    if (config.label_noise > 0.0) {
        Rng noise(mix_seed(config.seed, kNoiseStream, domain_tag));
        for (auto& r : manifest.records) {
            if (r.split != "train") continue;
            if (noise.uniform() < config.label_noise)
                r.class_name = classes[noise.index(classes.size())];
        }
    }

    save_manifest(manifest, config.out_dir / "manifest.tsv");
    return manifest;
}

std::array<float, 3> compute_mean_rgb(const DatasetManifest& manifest) {
    auto train = manifest.split_records("train");
    if (train.empty()) throw DataError("compute_mean_rgb: training split is empty");
    double sum[3] = {0, 0, 0};
    size_t count = 0;
    for (const auto* r : train) {
        Image img = read_png(manifest.base_dir / r->path);
        const size_t n = static_cast<size_t>(img.width) * img.height;
        for (size_t p = 0; p < n; ++p)
            for (int c = 0; c < 3; ++c) sum[c] += img.rgb[3 * p + c] / 255.0;
        count += n;
    }
    return {static_cast<float>(sum[0] / count), static_cast<float>(sum[1] / count),
            static_cast<float>(sum[2] / count)};
}

Tensor preprocess(const Image& img, const std::array<float, 3>& mean_rgb) {
    const size_t H = static_cast<size_t>(img.height), W = static_cast<size_t>(img.width);
    Tensor t({3, H, W});
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
            const uint8_t* px = img.pixel(static_cast<int>(x), static_cast<int>(y));
            for (size_t c = 0; c < 3; ++c)
                t[(c * H + y) * W + x] = static_cast<float>(px[c]) / 255.0f - mean_rgb[c];
        }
    return t;
}

Tensor load_and_preprocess(const DatasetManifest& manifest, const ManifestRecord& record,
                           const std::array<float, 3>& mean_rgb) {
    return preprocess(read_png(manifest.base_dir / record.path), mean_rgb);
}

LabeledImages load_split(const DatasetManifest& manifest, const std::string& split,
                         const std::array<float, 3>& mean_rgb,
                         const std::vector<std::string>& class_order) {
    auto records = manifest.split_records(split);
    LabeledImages out;
    out.images.resize(records.size());
    out.labels.resize(records.size());
    out.ids.resize(records.size());
    parallel_for(records.size(), [&](size_t i) {
        out.images[i] = load_and_preprocess(manifest, *records[i], mean_rgb);
        out.ids[i] = records[i]->id;
    });
    for (size_t i = 0; i < records.size(); ++i) {
        auto it = std::find(class_order.begin(), class_order.end(), records[i]->class_name);
        if (it == class_order.end())
            throw DataError("load_split: class '" + records[i]->class_name +
                            "' not among the model's classes");
        out.labels[i] = static_cast<int>(it - class_order.begin());
    }
    return out;
}

}  // namespace illu
