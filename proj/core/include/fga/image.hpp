#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

/// Interleaved 8-bit image; channels is 1 (gray), 3 (RGB) or 4 (RGBA).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// PNG, non-interlaced, bit depth 8 (gray / gray+alpha / RGB / RGBA /
/// palette). Encoding always writes filter-0 scanlines deflated at a fixed
/// level, so identical images give identical bytes.
std::vector<std::uint8_t> encode_png(const ImageU8& img);
void write_png(const ImageU8& img, const std::string& path);
ImageU8 decode_png(const std::uint8_t* data, std::size_t len);

/// PGM/PPM, ASCII (P2/P3) and binary (P5/P6), maxval <= 255.
ImageU8 decode_pnm(const std::uint8_t* data, std::size_t len);

/// Reads a file and dispatches on its magic bytes.
ImageU8 read_image(const std::string& path);

/// H x W x 3 double tensor in [0, 255]; grayscale replicates, alpha drops.
Tensor image_to_tensor(const ImageU8& img);

} // namespace fga
