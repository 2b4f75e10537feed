#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tag/dense_features.hpp"

namespace tag {

inline constexpr std::size_t kDefaultClusters = 15;

struct KMeansOptions {
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-4;     // relative centre movement that counts as converged
  unsigned workers = 1;  // results do not depend on this
};

struct KMeansResult {
  std::size_t k = 0;  // effective cluster count, may be below the request
  std::size_t dim = 0;
  std::vector<std::uint32_t> labels;
  std::vector<double> centers;  // k x dim
  std::vector<std::size_t> counts;
  std::vector<double> objective;  // SSE of every assignment pass, in order
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  std::span<const double> center(std::size_t c) const {
    return {centers.data() + c * dim, dim};
  }
};

/// Lloyd's algorithm with greedy k-means++ seeding over the rows of an
/// n x dim matrix, Euclidean metric. Deterministic for fixed (rows, k, seed):
/// partial sums are reduced over fixed chunks in chunk order. When fewer than
/// k distinct rows exist the result has fewer clusters and a warning. Every
/// reported cluster is non-empty.
KMeansResult kmeans_rows(std::span<const float> rows, std::size_t dim, std::size_t k,
                         const KMeansOptions& options);

/// Dense cluster assignment of an H x W image.
struct SegmentPartition {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> assignment;  // row-major H x W, values < k
  std::vector<std::size_t> counts;        // pixels per cluster
  std::vector<std::string> warnings;

  std::size_t pixels() const { return height * width; }
};

/// Clusters L2-normalized per-pixel features.
SegmentPartition kmeans(const PixelFeatureMap& features, std::size_t k,
                        const KMeansOptions& options);

/// Variant that clusters the L2-normalized patch grid and lets every pixel
/// inherit the cluster of the patch containing it.
SegmentPartition kmeans_patch_grid(const DenseFeatureMap& features, std::size_t k,
                                   const KMeansOptions& options);

/// Representative embedding per segment (mean of raw per-pixel features).
struct SegmentEmbeddings {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::string source;
  std::vector<float> vectors;     // k x dim
  std::vector<bool> degenerate;   // pooled vector is all-zero

  std::span<const float> row(std::size_t c) const {
    return {vectors.data() + c * dim, dim};
  }
};

SegmentEmbeddings pool_segments(const SegmentPartition& partition,
                                const PixelFeatureMap& features, unsigned workers = 1);

}  // namespace tag
