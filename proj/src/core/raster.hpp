#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace spmseg::detail {

// Decoded file contents before any intensity policy is applied.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB); alpha is dropped by the decoders
  int bits = 0;      // 8 or 16
  std::vector<std::uint16_t> samples;  // interleaved, row-major
};

Raster read_png(const std::filesystem::path& path);
Raster read_tiff(const std::filesystem::path& path);
void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::uint8_t* data);

}  // namespace spmseg::detail
