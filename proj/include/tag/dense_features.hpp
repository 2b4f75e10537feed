#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tag/tensor_store.hpp"

namespace tag {

inline constexpr const char* kDinoSource = "dinov2-vitl14";
inline constexpr const char* kClipSource = "clip-vitl14-value";

enum class UpsampleMode { kBilinear, kNearest };

UpsampleMode parse_upsample_mode(const std::string& name);

/// Patch-grid features of one image, D x h x w channel-major as produced by
/// the extractor, with h = ceil(H / P) and w = ceil(W / P).
class DenseFeatureMap {
 public:
  /// Validates the grid shape against (image_h, image_w, patch) and rejects
  /// non-finite values.
  DenseFeatureMap(Tensor tensor, std::size_t image_h, std::size_t image_w,
                  std::size_t patch, std::string source);

  std::size_t dim() const { return dim_; }
  std::size_t grid_h() const { return grid_h_; }
  std::size_t grid_w() const { return grid_w_; }
  std::size_t image_h() const { return image_h_; }
  std::size_t image_w() const { return image_w_; }
  std::size_t patch() const { return patch_; }
  const std::string& source() const { return source_; }

  float at(std::size_t c, std::size_t i, std::size_t j) const {
    return values_[(c * grid_h_ + i) * grid_w_ + j];
  }
  const std::vector<float>& values() const { return values_; }

 private:
  std::size_t dim_ = 0, grid_h_ = 0, grid_w_ = 0;
  std::size_t image_h_ = 0, image_w_ = 0, patch_ = 0;
  std::string source_;
  std::vector<float> values_;
};

/// Per-pixel features stored pixel-major: values[(y * width + x) * dim + c].
struct PixelFeatureMap {
  std::size_t dim = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::string source;
  std::vector<float> values;

  std::size_t pixels() const { return height * width; }
  std::span<const float> pixel(std::size_t index) const {
    return {values.data() + index * dim, dim};
  }
  std::span<float> pixel(std::size_t index) {
    return {values.data() + index * dim, dim};
  }
};

/// Interpolates the patch grid to H x W pixels. Patch (i, j) is centred at
/// pixel coordinate (i * P + (P - 1) / 2, j * P + (P - 1) / 2); coordinates
/// beyond the outermost centres replicate the border patch.
PixelFeatureMap upsample(const DenseFeatureMap& map,
                         UpsampleMode mode = UpsampleMode::kBilinear,
                         unsigned workers = 1);

/// Bilinear value of every channel at a continuous pixel coordinate, using
/// the same centre alignment and clamping as upsample().
void sample_bilinear(const DenseFeatureMap& map, double y, double x,
                     std::span<float> out);

double dot(std::span<const float> a, std::span<const float> b);
double l2_norm(std::span<const float> v);

struct CosineResult {
  double value = 0.0;
  bool degenerate = false;  // one side was the zero vector
};

CosineResult cosine(std::span<const float> a, std::span<const float> b);

struct NormalizedVector {
  std::vector<float> values;
  bool degenerate = false;  // input was the zero vector and passed through
};

NormalizedVector l2_normalize(std::span<const float> v);

/// Normalizes each `dim`-wide row of a row-major matrix in place. Returns the
/// indices of zero rows, which are left untouched.
std::vector<std::size_t> l2_normalize_rows(std::span<float> rows, std::size_t dim);

}  // namespace tag
