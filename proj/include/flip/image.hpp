#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flip/field.hpp"

namespace flip {

// 8-bit raster, 1 channel (PGM P5) or 3 channels (PPM P6), maxval 255.
struct Image {
    int h = 0;
    int w = 0;
    int c = 1;
    std::vector<std::uint8_t> pix;  // row-major, channel-interleaved

    std::size_t size() const { return pix.size(); }
};

void write_image(const Image& img, const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);

// Latent decode: clamp((z+1)/2, 0, 1)*255, rounded half away from zero.
Image decode(const Field& z0);

// Inverse affine map for loading 8-bit images as latents in [-1, 1].
Field field_from_image(const Image& img);

}  // namespace flip
