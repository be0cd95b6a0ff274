#include "illu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace illu {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian");

namespace {

constexpr char kMagic[4] = {'N', 'N', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

void write_u8(std::ofstream& out, uint8_t v) { out.write(reinterpret_cast<const char*>(&v), 1); }

uint32_t read_u32(std::ifstream& in, const std::string& what) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4))
        throw DataError("checkpoint truncated while reading " + what);
    return v;
}

uint8_t read_u8(std::ifstream& in, const std::string& what) {
    uint8_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 1))
        throw DataError("checkpoint truncated while reading " + what);
    return v;
}

nlohmann::json scale_to_json(const ScaleConfig& s) {
    nlohmann::json blocks = nlohmann::json::array();
    for (auto& b : s.blocks) blocks.push_back({b[0], b[1]});
    return {{"blocks", blocks},
            {"fc1", s.fc1},
            {"fc2", s.fc2},
            {"input_channels", s.input_channels},
            {"input_side", s.input_side}};
}

ScaleConfig scale_from_json(const nlohmann::json& j) {
    ScaleConfig s;
    s.input_side = j.at("input_side").get<int>();
    s.input_channels = j.at("input_channels").get<int>();
    s.fc1 = j.at("fc1").get<int>();
    s.fc2 = j.at("fc2").get<int>();
    s.blocks.clear();
    for (auto& b : j.at("blocks")) s.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    return s;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());

    out.write(kMagic, 4);
    write_u32(out, kVersion);

    nlohmann::json meta = {{"classes", net.class_names},
                           {"mean_rgb", {net.mean_rgb[0], net.mean_rgb[1], net.mean_rgb[2]}},
                           {"scale", scale_to_json(net.scale)}};
    const std::string meta_str = meta.dump();
    write_u32(out, static_cast<uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    for (const auto& layer : net.layers) {
        auto record = [&](const Tensor& t, uint8_t role) {
            write_u32(out, static_cast<uint32_t>(layer.index));
            write_u8(out, role);
            write_u8(out, static_cast<uint8_t>(t.rank()));
            for (size_t d : t.shape()) write_u32(out, static_cast<uint32_t>(d));
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.size() * sizeof(float)));
        };
        record(layer.weight, 0);
        record(layer.bias, 1);
    }
    out.close();
    if (!out) throw DataError("checkpoint write failed: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path.string());
    uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " +
                        path.string());

    uint32_t meta_len = read_u32(in, "metadata length");
    std::string meta_str(meta_len, '\0');
    if (!in.read(meta_str.data(), meta_len))
        throw DataError("checkpoint truncated in metadata: " + path.string());

    Network net;
    try {
        nlohmann::json meta = nlohmann::json::parse(meta_str);
        net.scale = scale_from_json(meta.at("scale"));
        net.class_names = meta.at("classes").get<std::vector<std::string>>();
        auto mean = meta.at("mean_rgb");
        for (int c = 0; c < 3; ++c) net.mean_rgb[c] = mean.at(c).get<float>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint metadata malformed in " + path.string() + ": " + e.what());
    }
    net.scale.validate();
    if (net.class_names.size() < 2)
        throw DataError("checkpoint metadata lists fewer than 2 classes: " + path.string());

    // expected architecture from the metadata
    Network skeleton = build_network<float>(net.scale, net.class_names, 0);

    for (auto& expect : skeleton.layers) {
        ParamLayer<float> layer;
        layer.index = expect.index;
        layer.role = expect.role;
        auto record = [&](const Tensor& like, uint8_t role) {
            uint32_t idx = read_u32(in, "layer index");
            if (idx != static_cast<uint32_t>(expect.index))
                throw DataError("checkpoint layer order mismatch: expected layer " +
                                std::to_string(expect.index) + ", found " + std::to_string(idx) +
                                " in " + path.string());
            uint8_t r = read_u8(in, "role tag");
            if (r != role)
                throw DataError("checkpoint role tag mismatch at layer " +
                                std::to_string(expect.index) + " in " + path.string());
            uint8_t rank = read_u8(in, "rank");
            if (rank != like.rank())
                throw DataError("checkpoint rank mismatch at layer " +
                                std::to_string(expect.index) + " in " + path.string());
            std::vector<size_t> dims(rank);
            for (auto& d : dims) d = read_u32(in, "dimension");
            if (dims != like.shape())
                throw DataError("checkpoint shape mismatch at layer " +
                                std::to_string(expect.index) + ": header says " +
                                Tensor::shape_to_string(dims) + ", architecture needs " +
                                like.shape_str() + " in " + path.string());
            Tensor t(dims);
            if (!in.read(reinterpret_cast<char*>(t.data()),
                         static_cast<std::streamsize>(t.size() * sizeof(float))))
                throw DataError("checkpoint truncated in layer " + std::to_string(expect.index) +
                                " payload: " + path.string());
            return t;
        };
        layer.weight = record(expect.weight, 0);
        layer.bias = record(expect.bias, 1);
        net.layers.push_back(std::move(layer));
    }
    if (in.peek() != EOF)
        throw DataError("checkpoint has trailing bytes after last layer: " + path.string());
    return net;
}

}  // namespace illu
