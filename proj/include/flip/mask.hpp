#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "flip/field.hpp"

namespace flip {

// H x W mask with values stored as 0.0f / 1.0f so it can feed Hadamard
// products directly.
struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<float> v;

    BinaryMask() = default;
    BinaryMask(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width, 0.0f) {}

    float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

    std::size_t count_ones() const;
    bool empty_support() const { return count_ones() == 0; }

    Field to_field() const;  // rank-2 [H,W], broadcasts over channels
};

// M_B = 1 - sum(M_i); inputs must be pairwise disjoint. An empty list
// yields the all-ones mask for the given frame.
BinaryMask background_mask(int h, int w, std::span<const BinaryMask> masks);

// Bounding box of the support, dilated by `margin` on every side and
// clamped to the frame.
BinaryMask expanded_box_mask(const BinaryMask& m, int margin);

BinaryMask complement(const BinaryMask& m);

// Block-max pooling; any 1 in a block marks the pooled cell.
BinaryMask downsample_mask(const BinaryMask& m, int factor);

// PGM P5, maxval 255; pixel >= 128 reads as 1.0, save writes 255/0.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& m, const std::filesystem::path& path);

}  // namespace flip
