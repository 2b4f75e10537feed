#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tag {

/// Single-channel integer image (label ids or class ids).
struct IndexImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> values;  // row-major
};

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::uint8_t* at(std::size_t y, std::size_t x) { return &rgb[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t y, std::size_t x) const { return &rgb[(y * width + x) * 3]; }
};

/// Reads palette indices or gray levels (8 or 16 bit) without any colour
/// conversion. Colour images are rejected with a FormatError.
IndexImage read_index_png(const std::filesystem::path& path);

/// 16-bit grayscale; every value must fit in 16 bits.
void write_index_png(const std::filesystem::path& path, const IndexImage& image);

/// Any PNG converted to 8-bit RGB (alpha dropped).
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace tag
