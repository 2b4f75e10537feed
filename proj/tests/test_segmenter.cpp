#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "support/support.hpp"
#include "tag/error.hpp"
#include "tag/segmenter.hpp"

using namespace tag;
using tag::testing::adjusted_rand_index;
using tag::testing::make_blobs;

namespace {

PixelFeatureMap pixel_map(std::size_t h, std::size_t w, std::size_t dim, std::vector<float> values) {
  PixelFeatureMap m;
  m.dim = dim;
  m.height = h;
  m.width = w;
  m.source = kClipSource;
  m.values = std::move(values);
  return m;
}

tag::testing::Blobs three_blobs(std::size_t per_blob, std::uint64_t seed) {
  return make_blobs({{0, 0, 0, 0}, {1.5, 0, 0, 0}, {0, 1.5, 0.5, 0}}, per_blob, 0.05, seed);
}

}  // namespace

TEST_CASE("k-means recovers separated blobs") {
  const auto blobs = three_blobs(500, 1);
  const auto r = kmeans_rows(blobs.rows, blobs.dim, 3, {});
  CHECK(r.k == 3);
  CHECK(r.converged);
  CHECK(adjusted_rand_index(r.labels, blobs.labels) == 1.0);
  CHECK(std::accumulate(r.counts.begin(), r.counts.end(), std::size_t{0}) == 1500);
}

TEST_CASE("k-means is deterministic across worker counts and runs") {
  const auto blobs = three_blobs(1500, 2);
  KMeansOptions opts;
  const auto ref = kmeans_rows(blobs.rows, blobs.dim, 3, opts);
  for (unsigned w : {1u, 4u, 8u}) {
    opts.workers = w;
    for (int rep = 0; rep < 2; ++rep) {
      const auto r = kmeans_rows(blobs.rows, blobs.dim, 3, opts);
      CHECK(r.labels == ref.labels);
      CHECK(r.centers == ref.centers);
      CHECK(r.objective == ref.objective);
    }
  }
  opts.workers = 1;
  opts.seed = 99;
  const auto other = kmeans_rows(blobs.rows, blobs.dim, 3, opts);
  CHECK(adjusted_rand_index(other.labels, blobs.labels) == 1.0);
}

TEST_CASE("k-means objective never increases") {
  const auto rows = tag::testing::gaussian_rows(3000, 6, 4);
  KMeansOptions opts;
  opts.tol = 0.0;
  opts.max_iters = 50;
  const auto r = kmeans_rows(rows, 6, 12, opts);
  REQUIRE(r.objective.size() >= 2);
  for (std::size_t i = 1; i < r.objective.size(); ++i) {
    CHECK(r.objective[i] <= r.objective[i - 1] * (1 + 1e-12));
  }
  for (auto c : r.counts) CHECK(c > 0);
}

TEST_CASE("k-means assignment is consistent under row permutation") {
  const auto blobs = three_blobs(200, 6);
  const std::size_t n = blobs.labels.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<float> shuffled;
  std::vector<std::uint32_t> truth;
  for (auto p : perm) {
    shuffled.insert(shuffled.end(), blobs.rows.begin() + p * blobs.dim, blobs.rows.begin() + (p + 1) * blobs.dim);
    truth.push_back(blobs.labels[p]);
  }
  const auto r = kmeans_rows(shuffled, blobs.dim, 3, {});
  CHECK(adjusted_rand_index(r.labels, truth) == 1.0);
}

TEST_CASE("k-means parameter and input errors") {
  const std::vector<float> rows = {0, 0, 1, 1};
  CHECK_THROWS_AS(kmeans_rows(rows, 2, 0, {}), ParameterError);
  CHECK_THROWS_AS(kmeans_rows(rows, 2, 3, {}), ParameterError);
  KMeansOptions bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(kmeans_rows(rows, 2, 1, bad), ParameterError);
  bad = {};
  bad.tol = -1;
  CHECK_THROWS_AS(kmeans_rows(rows, 2, 1, bad), ParameterError);
  std::vector<float> nan = rows;
  nan[1] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(kmeans_rows(nan, 2, 1, {}), InputError);
}

TEST_CASE("single cluster covers the image") {
  const auto f = pixel_map(6, 7, 3, tag::testing::gaussian_rows(42, 3, 8));
  const auto p = kmeans(f, 1, {});
  CHECK(p.k == 1);
  CHECK(p.counts == std::vector<std::size_t>{42});
  for (auto a : p.assignment) CHECK(a == 0);
}

TEST_CASE("identical features with two clusters") {
  const auto f = pixel_map(4, 4, 2, std::vector<float>(32, 0.5f));
  const auto p = kmeans(f, 2, {});
  CHECK(std::accumulate(p.counts.begin(), p.counts.end(), std::size_t{0}) == 16);
  CHECK(p.k == 1);
  CHECK_FALSE(p.warnings.empty());
  for (auto a : p.assignment) CHECK(a < p.k);
}

TEST_CASE("k-means on pixels clusters by direction") {
  // Same direction, different length: one cluster after normalization.
  std::vector<float> v;
  for (int i = 0; i < 8; ++i) {
    v.push_back(static_cast<float>(i + 1));
    v.push_back(0.f);
  }
  for (int i = 0; i < 8; ++i) {
    v.push_back(0.f);
    v.push_back(static_cast<float>(i + 1));
  }
  const auto p = kmeans(pixel_map(4, 4, 2, v), 2, {});
  CHECK(p.k == 2);
  for (int i = 1; i < 8; ++i) CHECK(p.assignment[i] == p.assignment[0]);
  for (int i = 9; i < 16; ++i) CHECK(p.assignment[i] == p.assignment[8]);
  CHECK(p.assignment[0] != p.assignment[8]);
}

TEST_CASE("patch-grid clustering assigns each pixel its patch label") {
  std::vector<float> vals(2 * 2 * 3);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 2; ++i) {
      vals[(0 * 2 + i) * 3 + j] = j == 2 ? 0.f : 1.f;
      vals[(1 * 2 + i) * 3 + j] = j == 2 ? 1.f : 0.f;
    }
  }
  const DenseFeatureMap m(Tensor({2, 2, 3}, vals), 8, 12, 4, kDinoSource);
  const auto p = kmeans_patch_grid(m, 2, {});
  REQUIRE(p.assignment.size() == 96);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 12; ++x) {
      CHECK((p.assignment[y * 12 + x] == p.assignment[11]) == (x >= 8));
    }
  }
}

TEST_CASE("pooling constant features") {
  const std::vector<float> v = {1.5f, -2.f, 0.25f};
  std::vector<float> vals;
  for (int i = 0; i < 20; ++i) vals.insert(vals.end(), v.begin(), v.end());
  const auto f = pixel_map(4, 5, 3, vals);
  SegmentPartition part{4, 5, 3, {}, {}, {}};
  for (int i = 0; i < 20; ++i) part.assignment.push_back(static_cast<std::uint32_t>(i % 3));
  part.counts = {7, 7, 6};
  const auto e = pool_segments(part, f);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(e.row(k)[c] == v[c]);
    CHECK_FALSE(e.degenerate[k]);
  }
}

TEST_CASE("pooling a one-pixel segment returns that pixel") {
  const auto vals = tag::testing::gaussian_rows(9, 4, 21);
  const auto f = pixel_map(3, 3, 4, vals);
  SegmentPartition part{3, 3, 2, std::vector<std::uint32_t>(9, 0), {8, 1}, {}};
  part.assignment[4] = 1;
  const auto e = pool_segments(part, f);
  for (std::size_t c = 0; c < 4; ++c) CHECK(e.row(1)[c] == vals[4 * 4 + c]);
}

TEST_CASE("pooling flags zero segments and rejects bad partitions") {
  std::vector<float> vals(2 * 2 * 2, 1.f);
  vals[0] = vals[1] = 0.f;
  const auto f = pixel_map(2, 2, 2, vals);
  SegmentPartition part{2, 2, 2, {0, 1, 1, 1}, {1, 3}, {}};
  const auto e = pool_segments(part, f);
  CHECK(e.degenerate[0]);
  CHECK_FALSE(e.degenerate[1]);

  SegmentPartition wrong{3, 2, 1, std::vector<std::uint32_t>(6, 0), {6}, {}};
  CHECK_THROWS_AS(pool_segments(wrong, f), InputError);
  SegmentPartition empty{2, 2, 3, {0, 1, 1, 1}, {1, 3, 0}, {}};
  CHECK_THROWS_AS(pool_segments(empty, f), InternalError);
}

TEST_CASE("pooling is independent of worker count") {
  const std::size_t h = 64, w = 48, d = 8;
  const auto f = pixel_map(h, w, d, tag::testing::gaussian_rows(h * w, d, 31));
  const auto p = kmeans(f, 5, {});
  const auto one = pool_segments(p, f, 1);
  for (unsigned workers : {3u, 8u}) CHECK(pool_segments(p, f, workers).vectors == one.vectors);
}
