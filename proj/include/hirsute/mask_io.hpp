#pragma once

#include <filesystem>

#include "hirsute/maskops.hpp"

namespace hirsute {

// Reads an 8-bit single-channel PNG or a PGM (ASCII P2 or binary P5), chosen
// by file signature. Pixel values other than 0, 1, 2 are a DataError.
LabelMask load_mask(const std::filesystem::path& path);

void write_mask_pgm(const LabelMask& mask, const std::filesystem::path& path);
void write_mask_png(const LabelMask& mask, const std::filesystem::path& path);

}  // namespace hirsute
