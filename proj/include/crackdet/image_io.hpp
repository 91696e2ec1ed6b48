#pragma once

#include <filesystem>

#include "crackdet/image.hpp"

namespace crackdet {

// Supported inputs: 8/16-bit grayscale PNG, and binary or ASCII PGM with
// maxval 255 or 65535. Intensities are divided by the format maximum.
GrayImage load_gray(const std::filesystem::path& path);

// Reads either a grayscale image (normalized as load_gray) or a QPM1 raw
// map. Values are clamped into [0,1]; NaN payloads are rejected.
ProbabilityMap load_probability_map(const std::filesystem::path& path);

// QPM1: magic "QPM1", width u32, height u32, reserved u32 = 0, then
// width*height IEEE-754 binary32 values, row-major, little-endian.
void save_probability_map(const ProbabilityMap& map, const std::filesystem::path& path);

// 8-bit grayscale PNG with crack = 255, background = 0.
void save_binary_map(const BinaryMap& map, const std::filesystem::path& path);

// 8-bit grayscale PNG, intensities rounded to v*255.
void save_gray8(const GrayImage& image, const std::filesystem::path& path);

// Loads a PNG/PGM mask; every pixel must be exactly 0 or the format max.
GroundTruthMask load_mask(const std::filesystem::path& path);

}  // namespace crackdet
