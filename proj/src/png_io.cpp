#include "tag/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "tag/error.hpp"

namespace tag {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError(std::string("cannot open ") + path.string());
  return f;
}

class PngReader {
 public:
  PngReader() {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png_) info_ = png_create_info_struct(png_);
    if (!png_ || !info_) throw InternalError("libpng: out of memory");
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() { return png_; }
  png_infop info() { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngWriter {
 public:
  PngWriter() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png_) info_ = png_create_info_struct(png_);
    if (!png_ || !info_) throw InternalError("libpng: out of memory");
  }
  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;

  png_structp png() { return png_; }
  png_infop info() { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

bool is_png(std::FILE* f) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f) != 8) return false;
  return png_sig_cmp(sig, 0, 8) == 0;
}

// Decodes the whole image into `rows` (one byte buffer per row) after the
// caller-supplied transform setup. Returns false if libpng signalled an error.
template <class Setup>
bool decode_rows(PngReader& r, std::FILE* f, std::vector<std::vector<png_byte>>& rows,
                 std::vector<png_bytep>& pointers, Setup&& setup) {
  if (setjmp(png_jmpbuf(r.png()))) return false;
  png_init_io(r.png(), f);
  png_set_sig_bytes(r.png(), 8);
  png_read_info(r.png(), r.info());
  setup();
  png_read_update_info(r.png(), r.info());
  const png_uint_32 h = png_get_image_height(r.png(), r.info());
  const std::size_t rowbytes = png_get_rowbytes(r.png(), r.info());
  rows.assign(h, std::vector<png_byte>(rowbytes));
  pointers.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) pointers[y] = rows[y].data();
  png_read_image(r.png(), pointers.data());
  png_read_end(r.png(), nullptr);
  return true;
}

bool encode_rows(PngWriter& w, std::FILE* f, std::size_t height, std::size_t width,
                 int bit_depth, int color_type, std::vector<std::vector<png_byte>>& rows,
                 std::vector<png_bytep>& pointers) {
  if (setjmp(png_jmpbuf(w.png()))) return false;
  png_init_io(w.png(), f);
  png_set_IHDR(w.png(), w.info(), static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(w.png(), 6);
  png_write_info(w.png(), w.info());
  pointers.resize(height);
  for (std::size_t y = 0; y < height; ++y) pointers[y] = rows[y].data();
  png_write_image(w.png(), pointers.data());
  png_write_end(w.png(), nullptr);
  return true;
}

}  // namespace

IndexImage read_index_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  if (!is_png(f.get())) throw FormatError("png", path.string() + " is not a PNG file");
  PngReader r;
  std::vector<std::vector<png_byte>> rows;
  std::vector<png_bytep> pointers;
  int color_type = 0, bit_depth = 0;
  const bool ok = decode_rows(r, f.get(), rows, pointers, [&] {
    color_type = png_get_color_type(r.png(), r.info());
    bit_depth = png_get_bit_depth(r.png(), r.info());
    if (bit_depth < 8) png_set_packing(r.png());
  });
  if (!ok) throw FormatError("png", "corrupt PNG " + path.string());
  if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError("png", path.string() + " is not an indexed or grayscale image");
  }

  IndexImage img;
  img.height = png_get_image_height(r.png(), r.info());
  img.width = png_get_image_width(r.png(), r.info());
  img.values.resize(img.height * img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      std::uint32_t v;
      if (bit_depth == 16) {
        v = (static_cast<std::uint32_t>(rows[y][2 * x]) << 8) | rows[y][2 * x + 1];
      } else {
        v = rows[y][x];
      }
      img.values[y * img.width + x] = v;
    }
  }
  return img;
}

void write_index_png(const std::filesystem::path& path, const IndexImage& image) {
  if (image.values.size() != image.height * image.width) {
    throw InternalError("write_index_png: buffer does not match shape");
  }
  std::vector<std::vector<png_byte>> rows(image.height, std::vector<png_byte>(image.width * 2));
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::uint32_t v = image.values[y * image.width + x];
      if (v > 0xFFFF) throw InputError("label id " + std::to_string(v) + " exceeds 16 bits");
      rows[y][2 * x] = static_cast<png_byte>(v >> 8);
      rows[y][2 * x + 1] = static_cast<png_byte>(v & 0xFF);
    }
  }
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  std::vector<png_bytep> pointers;
  if (!encode_rows(w, f.get(), image.height, image.width, 16, PNG_COLOR_TYPE_GRAY, rows,
                   pointers)) {
    throw InputError("failed writing " + path.string());
  }
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  if (!is_png(f.get())) throw FormatError("png", path.string() + " is not a PNG file");
  PngReader r;
  std::vector<std::vector<png_byte>> rows;
  std::vector<png_bytep> pointers;
  const bool ok = decode_rows(r, f.get(), rows, pointers, [&] {
    const int color_type = png_get_color_type(r.png(), r.info());
    if (png_get_bit_depth(r.png(), r.info()) == 16) png_set_strip_16(r.png());
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png());
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(r.png());
      png_set_gray_to_rgb(r.png());
    }
    png_set_strip_alpha(r.png());
  });
  if (!ok) throw FormatError("png", "corrupt PNG " + path.string());

  RgbImage img;
  img.height = png_get_image_height(r.png(), r.info());
  img.width = png_get_image_width(r.png(), r.info());
  img.rgb.resize(img.height * img.width * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    std::copy_n(rows[y].begin(), img.width * 3, img.rgb.begin() + y * img.width * 3);
  }
  return img;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  if (image.rgb.size() != image.height * image.width * 3) {
    throw InternalError("write_rgb_png: buffer does not match shape");
  }
  std::vector<std::vector<png_byte>> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y].assign(image.rgb.begin() + y * image.width * 3,
                   image.rgb.begin() + (y + 1) * image.width * 3);
  }
  FilePtr f = open_file(path, "wb");
  PngWriter w;
  std::vector<png_bytep> pointers;
  if (!encode_rows(w, f.get(), image.height, image.width, 8, PNG_COLOR_TYPE_RGB, rows, pointers)) {
    throw InputError("failed writing " + path.string());
  }
}

}  // namespace tag
