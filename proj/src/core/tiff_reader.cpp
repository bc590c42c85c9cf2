// Minimal baseline TIFF reader: first IFD only, uncompressed, chunky strips,
// unsigned 8/16-bit samples, gray (white- or black-is-zero) or RGB.

#include <fstream>
#include <iterator>
#include <map>

#include "raster.hpp"
#include "spmseg/error.hpp"

namespace spmseg::detail {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kTileWidth = 322,
  kSampleFormat = 339,
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string name)
      : bytes_(std::move(bytes)), name_(std::move(name)) {}

  Raster decode() {
    if (bytes_.size() < 8) fail("file too short");
    if (bytes_[0] == 'I' && bytes_[1] == 'I') {
      little_ = true;
    } else if (bytes_[0] == 'M' && bytes_[1] == 'M') {
      little_ = false;
    } else {
      fail("missing byte-order mark");
    }
    if (u16(2) != 42) fail("not a classic TIFF (magic != 42)");
    read_ifd(u32(4));

    if (tags_.count(kTileWidth)) fail("tiled TIFF is not supported");
    const auto width = scalar(kImageWidth);
    const auto height = scalar(kImageLength);
    const auto spp = scalar(kSamplesPerPixel, 1);
    const auto compression = scalar(kCompression, 1);
    const auto photometric = scalar(kPhotometric, 1);
    const auto planar = scalar(kPlanarConfig, 1);
    if (compression != 1) fail("compressed TIFF (scheme " + std::to_string(compression) + ") is not supported");
    if (planar != 1 && spp > 1) fail("planar TIFF is not supported");
    if (tags_.count(kSampleFormat) && values(kSampleFormat).front() != 1) {
      fail("only unsigned integer samples are supported");
    }
    const auto bits_list = values(kBitsPerSample);
    const auto bits = bits_list.empty() ? 1u : bits_list.front();
    for (auto b : bits_list) {
      if (b != bits) fail("mixed bits per sample");
    }
    if (bits != 8 && bits != 16) fail("unsupported bit depth " + std::to_string(bits));

    int channels = 0;
    if ((photometric == 0 || photometric == 1) && spp >= 1) {
      channels = 1;
    } else if (photometric == 2 && spp >= 3) {
      channels = 3;
    } else {
      fail("unsupported photometric interpretation " + std::to_string(photometric));
    }

    const auto offsets = values(kStripOffsets);
    const auto counts = values(kStripByteCounts);
    if (offsets.empty() || offsets.size() != counts.size()) fail("bad strip table");
    const std::uint32_t rows_per_strip = scalar(kRowsPerStrip, height);

    Raster r;
    r.width = static_cast<int>(width);
    r.height = static_cast<int>(height);
    r.channels = channels;
    r.bits = static_cast<int>(bits);
    r.samples.resize(static_cast<std::size_t>(width) * height * channels);

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t row_bytes = static_cast<std::size_t>(width) * spp * bytes_per_sample;
    const std::uint32_t max_value = bits == 8 ? 0xFF : 0xFFFF;
    for (std::uint32_t y = 0; y < height; ++y) {
      const std::size_t strip = y / rows_per_strip;
      if (strip >= offsets.size()) fail("strip table shorter than image");
      const std::size_t row_in_strip = y % rows_per_strip;
      const std::size_t start = static_cast<std::size_t>(offsets[strip]) + row_in_strip * row_bytes;
      if ((row_in_strip + 1) * row_bytes > counts[strip] || start + row_bytes > bytes_.size()) {
        fail("truncated pixel data");
      }
      for (std::uint32_t x = 0; x < width; ++x) {
        for (int c = 0; c < channels; ++c) {
          const std::size_t at = start + (static_cast<std::size_t>(x) * spp + c) * bytes_per_sample;
          std::uint32_t v = bits == 8 ? bytes_[at] : u16(at);
          if (photometric == 0) v = max_value - v;
          r.samples[(static_cast<std::size_t>(y) * width + x) * channels + c] =
              static_cast<std::uint16_t>(v);
        }
      }
    }
    return r;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("cannot decode TIFF " + name_ + ": " + what);
  }

  std::uint16_t u16(std::size_t at) const {
    if (at + 2 > bytes_.size()) fail("read past end of file");
    return little_ ? static_cast<std::uint16_t>(bytes_[at] | (bytes_[at + 1] << 8))
                   : static_cast<std::uint16_t>((bytes_[at] << 8) | bytes_[at + 1]);
  }

  std::uint32_t u32(std::size_t at) const {
    if (at + 4 > bytes_.size()) fail("read past end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint32_t b = bytes_[at + i];
      v |= little_ ? b << (8 * i) : b << (8 * (3 - i));
    }
    return v;
  }

  void read_ifd(std::uint32_t offset) {
    const std::uint16_t n = u16(offset);
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t entry = offset + 2 + 12 * static_cast<std::size_t>(i);
      const std::uint16_t tag = u16(entry);
      const std::uint16_t type = u16(entry + 2);
      const std::uint32_t count = u32(entry + 4);
      std::size_t size = 0;
      if (type == 3) {
        size = 2;
      } else if (type == 4) {
        size = 4;
      } else if (type == 1) {
        size = 1;
      } else {
        continue;  // rationals, ASCII etc. are irrelevant here
      }
      const std::size_t total = size * count;
      const std::size_t data_at = total <= 4 ? entry + 8 : u32(entry + 8);
      std::vector<std::uint32_t> vals(count);
      for (std::uint32_t k = 0; k < count; ++k) {
        const std::size_t at = data_at + k * size;
        vals[k] = size == 2 ? u16(at) : size == 4 ? u32(at) : bytes_.at(at);
      }
      tags_[tag] = std::move(vals);
    }
  }

  const std::vector<std::uint32_t>& values(std::uint16_t tag) const {
    static const std::vector<std::uint32_t> kEmpty;
    auto it = tags_.find(tag);
    return it == tags_.end() ? kEmpty : it->second;
  }

  std::uint32_t scalar(std::uint16_t tag) const {
    const auto& v = values(tag);
    if (v.empty()) fail("missing required tag " + std::to_string(tag));
    return v.front();
  }

  std::uint32_t scalar(std::uint16_t tag, std::uint32_t fallback) const {
    const auto& v = values(tag);
    return v.empty() ? fallback : v.front();
  }

  std::vector<std::uint8_t> bytes_;
  std::string name_;
  bool little_ = true;
  std::map<std::uint16_t, std::vector<std::uint32_t>> tags_;
};

}  // namespace

Raster read_tiff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path.string()).decode();
}

}  // namespace spmseg::detail
