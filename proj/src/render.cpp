#include "tag/render.hpp"

#include <algorithm>

#include "tag/error.hpp"

namespace tag {
namespace {

constexpr std::size_t kGlyphW = 5;
constexpr std::size_t kGlyphH = 7;
constexpr std::size_t kAdvance = kGlyphW + 1;
constexpr std::size_t kLineHeight = kGlyphH + 3;
constexpr std::size_t kMargin = 4;

using Glyph = std::array<std::uint8_t, kGlyphH>;

// Rows top to bottom, bit 4 is the leftmost column.
Glyph glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  switch (c) {
    case 'A': return {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
    case 'B': return {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E};
    case 'C': return {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E};
    case 'D': return {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E};
    case 'E': return {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F};
    case 'F': return {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10};
    case 'G': return {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F};
    case 'H': return {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
    case 'I': return {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E};
    case 'J': return {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C};
    case 'K': return {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11};
    case 'L': return {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F};
    case 'M': return {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11};
    case 'N': return {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11};
    case 'O': return {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    case 'P': return {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10};
    case 'Q': return {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D};
    case 'R': return {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11};
    case 'S': return {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E};
    case 'T': return {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04};
    case 'U': return {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    case 'V': return {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04};
    case 'W': return {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A};
    case 'X': return {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11};
    case 'Y': return {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04};
    case 'Z': return {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F};
    case '0': return {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E};
    case '1': return {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E};
    case '2': return {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F};
    case '3': return {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E};
    case '4': return {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02};
    case '5': return {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E};
    case '6': return {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E};
    case '7': return {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08};
    case '8': return {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E};
    case '9': return {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C};
    case ' ': return {0, 0, 0, 0, 0, 0, 0};
    case '-': return {0, 0, 0, 0x1F, 0, 0, 0};
    case '.': return {0, 0, 0, 0, 0, 0x0C, 0x0C};
    case ':': return {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0};
    case '_': return {0, 0, 0, 0, 0, 0, 0x1F};
    case '(': return {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
    case ')': return {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};
    case '/': return {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0};
    default: return {0x0E, 0x11, 0x01, 0x02, 0x04, 0, 0x04};  // '?'
  }
}

}  // namespace

std::array<std::uint8_t, 3> label_color(std::uint32_t id) {
  std::uint32_t c = id + 1;
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
  for (int bit = 7; bit >= 0 && c != 0; --bit) {
    for (int ch = 0; ch < 3; ++ch) {
      rgb[ch] = static_cast<std::uint8_t>(rgb[ch] | (((c >> ch) & 1u) << bit));
    }
    c >>= 3;
  }
  return rgb;
}

std::size_t draw_text(RgbImage& image, std::size_t y, std::size_t x, const std::string& text,
                      std::array<std::uint8_t, 3> color) {
  std::size_t cx = x;
  for (char ch : text) {
    const Glyph g = glyph(ch);
    for (std::size_t r = 0; r < kGlyphH; ++r) {
      for (std::size_t col = 0; col < kGlyphW; ++col) {
        if (!((g[r] >> (kGlyphW - 1 - col)) & 1u)) continue;
        const std::size_t py = y + r, px = cx + col;
        if (py < image.height && px < image.width) std::copy(color.begin(), color.end(), image.at(py, px));
      }
    }
    cx += kAdvance;
  }
  return cx - x;
}

RgbImage render_overlay(std::size_t height, std::size_t width,
                        std::span<const std::uint32_t> labels,
                        std::span<const LegendLine> legend,
                        const std::optional<RgbImage>& base) {
  if (labels.size() != height * width) throw InternalError("render_overlay: label buffer size");
  if (base && (base->height != height || base->width != width)) {
    throw InputError("overlay base image is " + std::to_string(base->height) + "x" +
                     std::to_string(base->width) + ", labels are " + std::to_string(height) +
                     "x" + std::to_string(width));
  }

  std::size_t text_w = 0;
  for (const auto& line : legend) text_w = std::max(text_w, line.text.size() * kAdvance);
  const std::size_t panel_w = kMargin * 2 + kGlyphH + kAdvance + text_w;
  const std::size_t panel_h = legend.empty() ? 0 : kMargin * 2 + legend.size() * kLineHeight;

  RgbImage out;
  out.height = height + panel_h;
  out.width = std::max(width, panel_w);
  out.rgb.assign(out.height * out.width * 3, 255);

  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const auto color = label_color(labels[y * width + x]);
      std::uint8_t* px = out.at(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        const unsigned under = base ? base->at(y, x)[ch] : 128u;
        px[ch] = static_cast<std::uint8_t>((under + color[ch] + 1) / 2);
      }
    }
  }

  std::size_t y = height + kMargin;
  for (const auto& line : legend) {
    const auto color = label_color(line.id);
    for (std::size_t r = 0; r < kGlyphH; ++r) {
      for (std::size_t c = 0; c < kGlyphH; ++c) {
        std::copy(color.begin(), color.end(), out.at(y + r, kMargin + c));
      }
    }
    draw_text(out, y, kMargin + kGlyphH + kAdvance, line.text, {0, 0, 0});
    y += kLineHeight;
  }
  return out;
}

}  // namespace tag
