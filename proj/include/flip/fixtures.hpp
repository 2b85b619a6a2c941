#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "flip/field.hpp"
#include "flip/mask.hpp"

namespace flip {

// Synthetic stand-ins for externally produced backgrounds, concept images
// and segmentation masks. Everything derives from the seed.
struct FixtureSet {
    Field background;            // smooth seeded gradient
    Field concept1;              // filled disk pattern
    Field concept2;              // diagonal stripe pattern
    BinaryMask mask1;            // 8x8 block, left half
    BinaryMask mask2;            // 8x8 block, right half
    std::string background_prompt = "plain gradient backdrop";
    std::string concept1_prompt = "round marker";
    std::string concept2_prompt = "striped tile";
};

inline constexpr int kFixtureMaskBlock = 8;

FixtureSet make_fixture_set(std::uint64_t seed, int h = 32, int w = 32);

// Writes background/concepts as PGM + LTF1, masks as PGM, and a ready
// config.json pointing at them. Returns the config path.
std::filesystem::path write_fixture_files(const FixtureSet& fx, const std::filesystem::path& dir,
                                          std::uint64_t seed);

}  // namespace flip
