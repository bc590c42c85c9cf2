#pragma once

#include <filesystem>

#include "spmseg/image.hpp"

namespace spmseg {

// Reads an 8- or 16-bit PNG or an uncompressed baseline TIFF. Colour inputs
// are collapsed by Rec.601 luminance. 8-bit data is kept as-is; 16-bit data is
// min-max quantized to 0..255 (a constant image maps to 0).
GrayImage load_gray(const std::filesystem::path& path);

// Writes an 8-bit single-channel PNG.
void write_gray(const GrayImage& img, const std::filesystem::path& path);

// Raw sample values (luminance-collapsed when colour), no quantization.
// Intended for height maps exported as 16-bit TIFF/PNG.
HeightMap load_height(const std::filesystem::path& path);

BinaryMask load_mask(const std::filesystem::path& path);
void write_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace spmseg
