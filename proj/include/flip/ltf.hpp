#pragma once

#include <filesystem>

#include "flip/field.hpp"

namespace flip {

// LTF1 raw field file: magic "LTF1", u8 rank, rank x u32 LE dims,
// then product(dims) x f32 LE values.
void write_ltf(const Field& f, const std::filesystem::path& path);
Field read_ltf(const std::filesystem::path& path);

}  // namespace flip
