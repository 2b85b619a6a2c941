#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flip/blend.hpp"

namespace flip {

// On-disk run configuration. Relative paths resolve against the config
// file's directory.
struct RunConfig {
    int image_h = 32;
    int image_w = 32;
    int image_c = 1;
    int latent_factor = 1;
    ScheduleParams schedule;
    std::uint64_t seed = 0;
    double alpha = 0.15;
    double beta = 0.8;
    int box_margin = 2;
    StageFlags stages;
    std::filesystem::path background_image;
    std::string background_prompt;
    struct Concept {
        std::filesystem::path image_path;
        std::filesystem::path mask_path;
        std::string prompt;
    };
    std::vector<Concept> concepts;
    std::filesystem::path output_dir;

    BlendConfig blend_config() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Loads an image latent from .ltf or .pgm/.ppm and checks it against the
// configured size.
Field load_image_field(const std::filesystem::path& path, int h, int w, int c);

// Atomic write: temp file in the target directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace flip
