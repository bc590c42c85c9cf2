#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "raster.hpp"
#include "spmseg/error.hpp"

namespace spmseg::detail {

namespace {

// All libpng state lives behind one pointer so nothing on the stack is
// touched between setjmp and a longjmp out of libpng.
struct PngState {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  Raster raster;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  char message[256] = {0};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

bool decode(PngState* st) {
  if (setjmp(png_jmpbuf(st->png))) return false;
  png_init_io(st->png, st->fp);
  png_read_info(st->png, st->info);

  const int color_type = png_get_color_type(st->png, st->info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st->png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(st->png, st->info) < 8) {
    png_set_expand_gray_1_2_4_to_8(st->png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(st->png);
  if (png_get_valid(st->png, st->info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(st->png);
    png_set_strip_alpha(st->png);
  }
  png_read_update_info(st->png, st->info);

  st->raster.width = static_cast<int>(png_get_image_width(st->png, st->info));
  st->raster.height = static_cast<int>(png_get_image_height(st->png, st->info));
  st->raster.channels = png_get_channels(st->png, st->info);
  st->raster.bits = png_get_bit_depth(st->png, st->info);

  const std::size_t rowbytes = png_get_rowbytes(st->png, st->info);
  st->buffer.resize(rowbytes * st->raster.height);
  st->rows.resize(st->raster.height);
  for (int y = 0; y < st->raster.height; ++y) st->rows[y] = st->buffer.data() + rowbytes * y;
  png_read_image(st->png, st->rows.data());
  png_read_end(st->png, nullptr);
  return true;
}

bool encode(PngState* st, int width, int height) {
  if (setjmp(png_jmpbuf(st->png))) return false;
  png_init_io(st->png, st->fp);
  png_set_IHDR(st->png, st->info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(st->png, st->info);
  png_write_image(st->png, st->rows.data());
  png_write_end(st->png, nullptr);
  return true;
}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
  auto st = std::make_unique<PngState>();
  st->fp = std::fopen(path.c_str(), "rb");
  if (!st->fp) throw DataError("cannot open " + path.string());
  st->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st.get(), on_error, on_warning);
  st->info = st->png ? png_create_info_struct(st->png) : nullptr;
  bool ok = st->info != nullptr && decode(st.get());
  png_destroy_read_struct(&st->png, &st->info, nullptr);
  std::fclose(st->fp);
  if (!ok) throw DataError("cannot decode PNG " + path.string() + ": " + st->message);

  Raster& r = st->raster;
  if (r.channels != 1 && r.channels != 3) {
    throw DataError("unsupported PNG channel count " + std::to_string(r.channels) + " in " +
                    path.string());
  }
  if (r.bits != 8 && r.bits != 16) {
    throw DataError("unsupported PNG bit depth " + std::to_string(r.bits) + " in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
  r.samples.resize(n);
  if (r.bits == 8) {
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = st->buffer[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      r.samples[i] = static_cast<std::uint16_t>((st->buffer[2 * i] << 8) | st->buffer[2 * i + 1]);
    }
  }
  return std::move(st->raster);
}

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::uint8_t* data) {
  if (width <= 0 || height <= 0) throw ParameterError("cannot write an empty image");
  auto st = std::make_unique<PngState>();
  st->fp = std::fopen(path.c_str(), "wb");
  if (!st->fp) throw DataError("cannot open " + path.string() + " for writing");
  st->rows.resize(height);
  for (int y = 0; y < height; ++y) {
    st->rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(width) * y);
  }
  st->png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st.get(), on_error, on_warning);
  st->info = st->png ? png_create_info_struct(st->png) : nullptr;
  bool ok = st->info != nullptr && encode(st.get(), width, height);
  png_destroy_write_struct(&st->png, &st->info);
  ok = (std::fclose(st->fp) == 0) && ok;
  if (!ok) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    throw DataError("cannot write PNG " + path.string() + ": " + st->message);
  }
}

}  // namespace spmseg::detail
