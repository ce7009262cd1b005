#include "styletopo/io/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>

#include <png.h>

namespace styletopo::io {

Rgba8 to_rgba(const StructureGrid& S) {
  if (S.channels != 4) throw DimensionError("png: structure must have 4 channels");
  Rgba8 img{S.height, S.width, std::vector<std::uint8_t>(S.pixels() * 4)};
  for (std::size_t p = 0; p < S.pixels(); ++p) {
    const double* s = &S.data[p * 4];
    img.data[p * 4 + 0] = quantize(s[1]);
    img.data[p * 4 + 1] = quantize(s[2]);
    img.data[p * 4 + 2] = quantize(s[3]);
    img.data[p * 4 + 3] = quantize(s[0]);
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; these helpers keep only trivially
// destructible locals between setjmp and the library calls.
bool write_rows(std::FILE* f, const Rgba8& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int i = 0; i < img.height; ++i) {
    png_write_row(png, img.data.data() + static_cast<std::size_t>(i) * img.width * 4);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

// Two passes: the header fills in the extent, then the caller sizes the
// buffer and the rows are decoded into it.
bool read_rows(std::FILE* f, Rgba8& img, bool header_only) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  if (!header_only) {
    for (int i = 0; i < img.height; ++i) {
      png_read_row(png, img.data.data() + static_cast<std::size_t>(i) * img.width * 4, nullptr);
    }
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

void write_png(const Rgba8& img, const std::filesystem::path& path) {
  if (img.height < 1 || img.width < 1 || img.data.size() != static_cast<std::size_t>(img.height) * img.width * 4) {
    throw DimensionError("png: bad image extent");
  }
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());
  if (!write_rows(f.get(), img)) throw IoError("png: encoding failed for " + path.string());
}

Rgba8 read_png(const std::filesystem::path& path) {
  Rgba8 img;
  {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot read " + path.string());
    if (!read_rows(f.get(), img, true)) throw IoError("png: cannot decode " + path.string());
  }
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * 4);
  File f(std::fopen(path.c_str(), "rb"));
  if (!f || !read_rows(f.get(), img, false)) throw IoError("png: cannot decode " + path.string());
  return img;
}

void export_png(const StructureGrid& S, const std::filesystem::path& path) { write_png(to_rgba(S), path); }

StructureGrid export_upsampled(const field::HashField& field, int h, int w, int factor,
                               const std::filesystem::path& path) {
  if (factor < 1) throw ValidationError("export: upsampling factor must be >= 1");
  StructureGrid S = field::sample_structure(field, h * factor, w * factor);
  export_png(S, path);
  return S;
}

}  // namespace styletopo::io
