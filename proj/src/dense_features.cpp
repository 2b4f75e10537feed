#include "tag/dense_features.hpp"

#include <algorithm>
#include <cmath>

#include "tag/error.hpp"
#include "tag/parallel.hpp"

namespace tag {
namespace {

// Continuous patch coordinate of pixel coordinate `p`, clamped to the grid.
struct Tap {
  std::size_t lo = 0, hi = 0;
  double t = 0.0;
};

Tap bilinear_tap(double p, std::size_t patch, std::size_t cells) {
  double u = (p + 0.5) / static_cast<double>(patch) - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(cells - 1));
  Tap tap;
  tap.lo = static_cast<std::size_t>(std::floor(u));
  tap.hi = std::min(tap.lo + 1, cells - 1);
  tap.t = u - static_cast<double>(tap.lo);
  return tap;
}

Tap nearest_tap(std::size_t p, std::size_t patch, std::size_t cells) {
  Tap tap;
  tap.lo = tap.hi = std::min(p / patch, cells - 1);
  return tap;
}

}  // namespace

UpsampleMode parse_upsample_mode(const std::string& name) {
  if (name == "bilinear") return UpsampleMode::kBilinear;
  if (name == "nearest") return UpsampleMode::kNearest;
  throw ParameterError("unknown upsample mode '" + name + "'");
}

DenseFeatureMap::DenseFeatureMap(Tensor tensor, std::size_t image_h,
                                 std::size_t image_w, std::size_t patch,
                                 std::string source)
    : image_h_(image_h), image_w_(image_w), patch_(patch), source_(std::move(source)) {
  if (tensor.rank() != 3) {
    throw InputError("dense features must be D x h x w, got rank " +
                     std::to_string(tensor.rank()));
  }
  if (patch == 0 || image_h == 0 || image_w == 0) {
    throw InputError("invalid geometry: image size and patch size must be positive");
  }
  dim_ = static_cast<std::size_t>(tensor.dim(0));
  grid_h_ = static_cast<std::size_t>(tensor.dim(1));
  grid_w_ = static_cast<std::size_t>(tensor.dim(2));
  const std::size_t want_h = (image_h + patch - 1) / patch;
  const std::size_t want_w = (image_w + patch - 1) / patch;
  if (grid_h_ != want_h || grid_w_ != want_w) {
    throw InputError("invalid geometry: " + std::to_string(image_h) + "x" +
                     std::to_string(image_w) + " image with patch " + std::to_string(patch) +
                     " needs a " + std::to_string(want_h) + "x" + std::to_string(want_w) +
                     " grid, got " + std::to_string(grid_h_) + "x" + std::to_string(grid_w_));
  }
  for (float v : tensor.values) {
    if (!std::isfinite(v)) throw InputError("non-finite value in " + source_ + " features");
  }
  values_ = std::move(tensor.values);
}

PixelFeatureMap upsample(const DenseFeatureMap& map, UpsampleMode mode, unsigned workers) {
  const std::size_t P = map.patch();
  if (map.image_h() < P || map.image_w() < P) {
    throw InputError("invalid geometry: image " + std::to_string(map.image_h()) + "x" +
                     std::to_string(map.image_w()) + " smaller than patch " +
                     std::to_string(P));
  }
  const std::size_t D = map.dim(), gh = map.grid_h(), gw = map.grid_w();
  const std::size_t H = map.image_h(), W = map.image_w();

  // Patch-major copy so every tap reads one contiguous D-vector.
  std::vector<float> patches(gh * gw * D);
  for (std::size_t c = 0; c < D; ++c) {
    for (std::size_t i = 0; i < gh; ++i) {
      for (std::size_t j = 0; j < gw; ++j) patches[(i * gw + j) * D + c] = map.at(c, i, j);
    }
  }

  std::vector<Tap> ytaps(H), xtaps(W);
  for (std::size_t y = 0; y < H; ++y) {
    ytaps[y] = mode == UpsampleMode::kBilinear ? bilinear_tap(static_cast<double>(y), P, gh)
                                               : nearest_tap(y, P, gh);
  }
  for (std::size_t x = 0; x < W; ++x) {
    xtaps[x] = mode == UpsampleMode::kBilinear ? bilinear_tap(static_cast<double>(x), P, gw)
                                               : nearest_tap(x, P, gw);
  }

  PixelFeatureMap out;
  out.dim = D;
  out.height = H;
  out.width = W;
  out.source = map.source();
  out.values.resize(H * W * D);

  parallel_chunks(ChunkPlan{H, 8}, workers, [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const Tap& ty = ytaps[y];
      for (std::size_t x = 0; x < W; ++x) {
        const Tap& tx = xtaps[x];
        const float* a = &patches[(ty.lo * gw + tx.lo) * D];
        const float* b = &patches[(ty.lo * gw + tx.hi) * D];
        const float* c = &patches[(ty.hi * gw + tx.lo) * D];
        const float* d = &patches[(ty.hi * gw + tx.hi) * D];
        float* o = &out.values[(y * W + x) * D];
        const double wx = tx.t, wy = ty.t;
        for (std::size_t k = 0; k < D; ++k) {
          const double top = (1.0 - wx) * a[k] + wx * b[k];
          const double bottom = (1.0 - wx) * c[k] + wx * d[k];
          o[k] = static_cast<float>((1.0 - wy) * top + wy * bottom);
        }
      }
    }
  });
  return out;
}

void sample_bilinear(const DenseFeatureMap& map, double y, double x, std::span<float> out) {
  if (out.size() != map.dim()) throw InputError("sample_bilinear: output size mismatch");
  const Tap ty = bilinear_tap(y, map.patch(), map.grid_h());
  const Tap tx = bilinear_tap(x, map.patch(), map.grid_w());
  for (std::size_t k = 0; k < map.dim(); ++k) {
    const double top = (1.0 - tx.t) * map.at(k, ty.lo, tx.lo) + tx.t * map.at(k, ty.lo, tx.hi);
    const double bottom =
        (1.0 - tx.t) * map.at(k, ty.hi, tx.lo) + tx.t * map.at(k, ty.hi, tx.hi);
    out[k] = static_cast<float>((1.0 - ty.t) * top + ty.t * bottom);
  }
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InputError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

CosineResult cosine(std::span<const float> a, std::span<const float> b) {
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  return {std::clamp(dot(a, b) / (na * nb), -1.0, 1.0), false};
}

NormalizedVector l2_normalize(std::span<const float> v) {
  NormalizedVector out{{v.begin(), v.end()}, false};
  const double n = l2_norm(v);
  if (n == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (float& x : out.values) x = static_cast<float>(x / n);
  return out;
}

std::vector<std::size_t> l2_normalize_rows(std::span<float> rows, std::size_t dim) {
  std::vector<std::size_t> zero_rows;
  if (dim == 0) return zero_rows;
  const std::size_t n = rows.size() / dim;
  for (std::size_t r = 0; r < n; ++r) {
    std::span<float> row = rows.subspan(r * dim, dim);
    const double norm = l2_norm(row);
    if (norm == 0.0) {
      zero_rows.push_back(r);
      continue;
    }
    for (float& x : row) x = static_cast<float>(x / norm);
  }
  return zero_rows;
}

}  // namespace tag
