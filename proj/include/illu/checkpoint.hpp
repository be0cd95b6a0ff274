#pragma once

#include <filesystem>

#include "illu/net.hpp"

namespace illu {

// Checkpoint file: magic "NNCK", u32 version=1, u32-length-prefixed UTF-8
// JSON metadata (scale config, class names, mean RGB), then one record per
// parameter tensor in forward order (weight then bias per layer):
// layer index u32, role tag u8 (0 weight / 1 bias), rank u8, dims u32[],
// payload little-endian f32 row-major. save(load(x)) is byte-identical.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace illu
