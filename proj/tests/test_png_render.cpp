#include <fstream>
#include <set>

#include "doctest.h"
#include "support/support.hpp"
#include "tag/error.hpp"
#include "tag/png_io.hpp"
#include "tag/render.hpp"

using namespace tag;
using tag::testing::TempDir;

TEST_CASE("index png round trip keeps 16-bit ids") {
  TempDir dir;
  IndexImage img{3, 5, {}};
  for (std::uint32_t i = 0; i < 15; ++i) img.values.push_back(i * 4000);
  write_index_png(dir / "l.png", img);
  const auto back = read_index_png(dir / "l.png");
  CHECK(back.height == 3);
  CHECK(back.width == 5);
  CHECK(back.values == img.values);
  img.values[0] = 70000;
  CHECK_THROWS_AS(write_index_png(dir / "bad.png", img), InputError);
}

TEST_CASE("rgb png round trip") {
  TempDir dir;
  RgbImage img{2, 2, {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30}};
  write_rgb_png(dir / "c.png", img);
  const auto back = read_rgb_png(dir / "c.png");
  CHECK(back.rgb == img.rgb);
  CHECK_THROWS_AS(read_index_png(dir / "c.png"), FormatError);
}

TEST_CASE("png read errors") {
  TempDir dir;
  CHECK_THROWS_AS(read_index_png(dir / "missing.png"), InputError);
  std::ofstream(dir / "junk.png") << "definitely not a png";
  CHECK_THROWS_AS(read_index_png(dir / "junk.png"), FormatError);
}

TEST_CASE("label colours are distinct and never black") {
  std::set<std::array<std::uint8_t, 3>> seen;
  for (std::uint32_t id = 0; id < 256; ++id) {
    const auto c = label_color(id);
    CHECK(c != std::array<std::uint8_t, 3>{0, 0, 0});
    seen.insert(c);
  }
  CHECK(seen.size() == 256);
  CHECK(label_color(0) == std::array<std::uint8_t, 3>{128, 0, 0});
}

TEST_CASE("overlay blends at half alpha and appends a legend") {
  const std::vector<std::uint32_t> labels = {0, 1, 1, 0};
  const std::vector<LegendLine> legend = {{0, "0 dog"}, {1, "1 grass"}};
  const auto out = render_overlay(2, 2, labels, legend, std::nullopt);
  CHECK(out.height > 2);
  const auto c0 = label_color(0);
  for (int ch = 0; ch < 3; ++ch) CHECK(out.at(0, 0)[ch] == (128u + c0[ch] + 1) / 2);

  RgbImage base{2, 2, std::vector<std::uint8_t>(12, 200)};
  const auto over = render_overlay(2, 2, labels, legend, base);
  const auto c1 = label_color(1);
  for (int ch = 0; ch < 3; ++ch) CHECK(over.at(0, 1)[ch] == (200u + c1[ch] + 1) / 2);

  RgbImage wrong{3, 2, std::vector<std::uint8_t>(18, 0)};
  CHECK_THROWS_AS(render_overlay(2, 2, labels, legend, wrong), InputError);
}

TEST_CASE("legend text is drawn") {
  RgbImage img{10, 40, std::vector<std::uint8_t>(10 * 40 * 3, 255)};
  const auto width = draw_text(img, 1, 1, "ab?", {0, 0, 0});
  CHECK(width == 18);
  std::size_t dark = 0;
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) dark += img.rgb[i] == 0;
  CHECK(dark > 20);
  // clipped text must not write out of bounds
  draw_text(img, 8, 35, "WWWW", {0, 0, 0});
}
