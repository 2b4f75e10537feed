#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tag/png_io.hpp"

namespace tag {

/// Deterministic colour per label id (bit-interleaved palette, never black).
std::array<std::uint8_t, 3> label_color(std::uint32_t id);

struct LegendLine {
  std::uint32_t id = 0;
  std::string text;
};

/// Blends label colours over `base` at alpha 0.5 (mid-gray when no base is
/// given) and appends a legend panel with one swatch and text line per entry.
RgbImage render_overlay(std::size_t height, std::size_t width,
                        std::span<const std::uint32_t> labels,
                        std::span<const LegendLine> legend,
                        const std::optional<RgbImage>& base);

/// Draws `text` with the built-in 5x7 font; letters are drawn upper case and
/// unsupported characters as '?'. Returns the pixel width used.
std::size_t draw_text(RgbImage& image, std::size_t y, std::size_t x, const std::string& text,
                      std::array<std::uint8_t, 3> color);

}  // namespace tag
