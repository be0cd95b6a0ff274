#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace illu {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;

    uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
    }
};

Image read_png(const std::filesystem::path& path);

// Deterministic encoder settings, so identical pixels give identical bytes.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace illu
