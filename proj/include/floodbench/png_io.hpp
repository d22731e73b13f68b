#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floodbench/common.hpp"

namespace floodbench {

// 8-bit raster in planar [C,H,W] order; 1 channel (grayscale) or 3 (RGB).
struct ImageU8 {
    int64_t channels = 0, height = 0, width = 0;
    std::vector<uint8_t> data;

    uint8_t at(int64_t c, int64_t y, int64_t x) const {
        return data[static_cast<size_t>((c * height + y) * width + x)];
    }
    uint8_t& at(int64_t c, int64_t y, int64_t x) {
        return data[static_cast<size_t>((c * height + y) * width + x)];
    }
};

ImageU8 make_image(int64_t channels, int64_t height, int64_t width);

void write_png(const std::string& path, const ImageU8& img);

// Decodes to 8-bit grayscale or RGB (palette expanded, alpha stripped,
// 16-bit reduced). Throws DataError on unreadable files.
ImageU8 read_png(const std::string& path);

}  // namespace floodbench
