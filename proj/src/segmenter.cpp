#include "tag/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tag/error.hpp"
#include "tag/parallel.hpp"

namespace tag {
namespace {

constexpr std::size_t kChunk = 1024;

// Uniform double in [0, 1) from the top 53 bits; platform independent, unlike
// std::uniform_real_distribution.
double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double squared_distance(const float* x, const double* c, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = static_cast<double>(x[i]) - c[i];
    s += d * d;
  }
  return s;
}

// Sum of a per-point quantity reduced over fixed chunks.
template <class Fn>
double chunked_sum(std::size_t n, unsigned workers, Fn&& term) {
  const ChunkPlan plan{n, kChunk};
  std::vector<double> partial(plan.count(), 0.0);
  parallel_chunks(plan, workers, [&](std::size_t c, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

class Lloyd {
 public:
  Lloyd(std::span<const float> rows, std::size_t dim, const KMeansOptions& options)
      : rows_(rows), dim_(dim), n_(rows.size() / dim), options_(options) {}

  KMeansResult run(std::size_t k) {
    KMeansResult result;
    result.dim = dim_;
    seed_centers(k, result);
    k = result.k;

    labels_.assign(n_, 0);
    dist_.assign(n_, 0.0);
    for (std::size_t it = 0; it < options_.max_iters; ++it) {
      result.objective.push_back(assign(result.centers, k));
      repair(k);
      std::vector<double> next = means(k);
      const double shift = relative_shift(result.centers, next);
      result.centers = std::move(next);
      result.iterations = it + 1;
      if (shift < options_.tol) {
        result.converged = true;
        break;
      }
    }
    // Final pass so labels agree with the reported centres.
    result.objective.push_back(assign(result.centers, k));
    repair(k);
    result.centers = means(k);
    result.labels = labels_;
    result.counts = counts_;
    return result;
  }

 private:
  const float* row(std::size_t i) const { return rows_.data() + i * dim_; }

  void seed_centers(std::size_t k, KMeansResult& result) {
    std::mt19937_64 rng(options_.seed);
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));

    auto add_center = [&](std::size_t i) {
      result.centers.insert(result.centers.end(), row(i), row(i) + dim_);
    };
    const auto first = std::min(n_ - 1, static_cast<std::size_t>(next_unit(rng) * n_));
    add_center(first);

    std::vector<double> closest(n_);
    const ChunkPlan plan{n_, kChunk};
    parallel_chunks(plan, options_.workers, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) closest[i] = squared_distance(row(i), result.centers.data(), dim_);
    });

    std::size_t chosen = 1;
    while (chosen < k) {
      const double total = chunked_sum(n_, options_.workers, [&](std::size_t i) { return closest[i]; });
      if (!(total > 0.0)) break;  // every remaining row duplicates a centre

      std::size_t best = 0;
      double best_potential = std::numeric_limits<double>::infinity();
      std::vector<double> best_closest;
      for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t cand = sample_proportional(closest, total, next_unit(rng));
        std::vector<double> updated(n_);
        const std::vector<double> cvec(row(cand), row(cand) + dim_);
        const double* c = cvec.data();
        parallel_chunks(plan, options_.workers, [&](std::size_t, std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) {
            updated[i] = std::min(closest[i], squared_distance(row(i), c, dim_));
          }
        });
        const double potential =
            chunked_sum(n_, options_.workers, [&](std::size_t i) { return updated[i]; });
        if (potential < best_potential) {
          best_potential = potential;
          best = cand;
          best_closest = std::move(updated);
        }
      }
      add_center(best);
      closest = std::move(best_closest);
      ++chosen;
    }
    result.k = chosen;
    if (chosen < k) {
      result.warnings.push_back("only " + std::to_string(chosen) +
                                " distinct feature vectors; requested " + std::to_string(k) +
                                " clusters, duplicates merged");
    }
  }

  std::size_t sample_proportional(const std::vector<double>& weight, double total,
                                  double u) const {
    const double target = u * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (weight[i] <= 0.0) continue;
      last_positive = i;
      acc += weight[i];
      if (acc > target) return i;
    }
    return last_positive;
  }

  // Nearest centre per row (ties to the lower index); refreshes sums/counts.
  double assign(const std::vector<double>& centers, std::size_t k) {
    const ChunkPlan plan{n_, kChunk};
    const std::size_t chunks = plan.count();
    std::vector<std::vector<double>> part_sums(chunks);
    std::vector<std::vector<std::size_t>> part_counts(chunks);
    std::vector<double> part_obj(chunks, 0.0);

    parallel_chunks(plan, options_.workers, [&](std::size_t c, std::size_t b, std::size_t e) {
      std::vector<double> sums(k * dim_, 0.0);
      std::vector<std::size_t> counts(k, 0);
      double obj = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const float* x = row(i);
        std::uint32_t best = 0;
        double best_d = squared_distance(x, centers.data(), dim_);
        for (std::size_t j = 1; j < k; ++j) {
          const double d = squared_distance(x, centers.data() + j * dim_, dim_);
          if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(j);
          }
        }
        labels_[i] = best;
        dist_[i] = best_d;
        obj += best_d;
        ++counts[best];
        double* s = sums.data() + best * dim_;
        for (std::size_t d = 0; d < dim_; ++d) s[d] += x[d];
      }
      part_sums[c] = std::move(sums);
      part_counts[c] = std::move(counts);
      part_obj[c] = obj;
    });

    sums_.assign(k * dim_, 0.0);
    counts_.assign(k, 0);
    double objective = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
      for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += part_sums[c][i];
      for (std::size_t j = 0; j < k; ++j) counts_[j] += part_counts[c][j];
      objective += part_obj[c];
    }
    return objective;
  }

  // Reseeds each empty cluster with the row farthest from its centre, taken
  // from a cluster that keeps at least one other member.
  void repair(std::size_t k) {
    for (std::size_t e = 0; e < k; ++e) {
      if (counts_[e] != 0) continue;
      std::size_t pick = n_;
      double far = -1.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (counts_[labels_[i]] >= 2 && dist_[i] > far) {
          far = dist_[i];
          pick = i;
        }
      }
      if (pick == n_) throw InternalError("k-means repair found no donor cluster");
      const std::uint32_t from = labels_[pick];
      const float* x = row(pick);
      for (std::size_t d = 0; d < dim_; ++d) {
        sums_[from * dim_ + d] -= x[d];
        sums_[e * dim_ + d] = x[d];
      }
      --counts_[from];
      counts_[e] = 1;
      labels_[pick] = static_cast<std::uint32_t>(e);
      dist_[pick] = 0.0;
    }
  }

  std::vector<double> means(std::size_t k) const {
    std::vector<double> out(k * dim_);
    for (std::size_t j = 0; j < k; ++j) {
      const double inv = 1.0 / static_cast<double>(counts_[j]);
      for (std::size_t d = 0; d < dim_; ++d) out[j * dim_ + d] = sums_[j * dim_ + d] * inv;
    }
    return out;
  }

  static double relative_shift(const std::vector<double>& before,
                               const std::vector<double>& after) {
    double moved = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double d = after[i] - before[i];
      moved += d * d;
      scale += before[i] * before[i];
    }
    if (scale == 0.0) return moved == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(moved / scale);
  }

  std::span<const float> rows_;
  std::size_t dim_;
  std::size_t n_;
  KMeansOptions options_;
  std::vector<std::uint32_t> labels_;
  std::vector<double> dist_;
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
};

std::vector<float> normalized_rows(std::span<const float> values, std::size_t dim) {
  for (float v : values) {
    if (!std::isfinite(v)) throw InputError("non-finite feature value");
  }
  std::vector<float> rows(values.begin(), values.end());
  l2_normalize_rows(rows, dim);
  return rows;
}

}  // namespace

KMeansResult kmeans_rows(std::span<const float> rows, std::size_t dim, std::size_t k,
                         const KMeansOptions& options) {
  if (dim == 0 || rows.size() % dim != 0) throw InputError("k-means: ragged input matrix");
  const std::size_t n = rows.size() / dim;
  if (k < 1) throw ParameterError("k-means: cluster count must be >= 1");
  if (k > n) {
    throw ParameterError("k-means: " + std::to_string(k) + " clusters for " +
                         std::to_string(n) + " points");
  }
  if (options.max_iters < 1) throw ParameterError("k-means: max iterations must be >= 1");
  if (!(options.tol >= 0.0)) throw ParameterError("k-means: tolerance must be >= 0");
  for (float v : rows) {
    if (!std::isfinite(v)) throw InputError("k-means: non-finite feature value");
  }
  return Lloyd(rows, dim, options).run(k);
}

SegmentPartition kmeans(const PixelFeatureMap& features, std::size_t k,
                        const KMeansOptions& options) {
  const std::vector<float> rows = normalized_rows(features.values, features.dim);
  KMeansResult r = kmeans_rows(rows, features.dim, k, options);
  SegmentPartition p;
  p.height = features.height;
  p.width = features.width;
  p.k = r.k;
  p.assignment = std::move(r.labels);
  p.counts = std::move(r.counts);
  p.warnings = std::move(r.warnings);
  return p;
}

SegmentPartition kmeans_patch_grid(const DenseFeatureMap& features, std::size_t k,
                                   const KMeansOptions& options) {
  const std::size_t D = features.dim(), gh = features.grid_h(), gw = features.grid_w();
  std::vector<float> patches(gh * gw * D);
  for (std::size_t c = 0; c < D; ++c) {
    for (std::size_t i = 0; i < gh; ++i) {
      for (std::size_t j = 0; j < gw; ++j) patches[(i * gw + j) * D + c] = features.at(c, i, j);
    }
  }
  const std::vector<float> rows = normalized_rows(patches, D);
  KMeansResult r = kmeans_rows(rows, D, k, options);

  SegmentPartition p;
  p.height = features.image_h();
  p.width = features.image_w();
  p.k = r.k;
  p.assignment.resize(p.height * p.width);
  p.counts.assign(p.k, 0);
  const std::size_t P = features.patch();
  for (std::size_t y = 0; y < p.height; ++y) {
    for (std::size_t x = 0; x < p.width; ++x) {
      const std::uint32_t label = r.labels[(y / P) * gw + x / P];
      p.assignment[y * p.width + x] = label;
      ++p.counts[label];
    }
  }
  p.warnings = std::move(r.warnings);
  return p;
}

SegmentEmbeddings pool_segments(const SegmentPartition& partition,
                                const PixelFeatureMap& features, unsigned workers) {
  if (partition.height != features.height || partition.width != features.width) {
    throw InputError("pool_segments: partition is " + std::to_string(partition.height) + "x" +
                     std::to_string(partition.width) + " but features are " +
                     std::to_string(features.height) + "x" + std::to_string(features.width));
  }
  const std::size_t k = partition.k, D = features.dim;
  const ChunkPlan plan{partition.pixels(), kChunk};
  std::vector<std::vector<double>> partial(plan.count());
  parallel_chunks(plan, workers, [&](std::size_t c, std::size_t b, std::size_t e) {
    std::vector<double> sums(k * D, 0.0);
    for (std::size_t i = b; i < e; ++i) {
      const std::uint32_t label = partition.assignment[i];
      if (label >= k) throw InternalError("pool_segments: label out of range");
      const auto f = features.pixel(i);
      double* s = sums.data() + label * D;
      for (std::size_t d = 0; d < D; ++d) s[d] += f[d];
    }
    partial[c] = std::move(sums);
  });

  std::vector<double> sums(k * D, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (const auto& part : partial) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += part[i];
  }
  for (std::uint32_t label : partition.assignment) ++counts[label];

  SegmentEmbeddings out;
  out.k = k;
  out.dim = D;
  out.source = features.source;
  out.vectors.resize(k * D);
  out.degenerate.assign(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) {
      throw InternalError("pool_segments: segment " + std::to_string(j) + " is empty");
    }
    bool all_zero = true;
    for (std::size_t d = 0; d < D; ++d) {
      const float v = static_cast<float>(sums[j * D + d] / static_cast<double>(counts[j]));
      out.vectors[j * D + d] = v;
      all_zero = all_zero && v == 0.0f;
    }
    out.degenerate[j] = all_zero;
  }
  return out;
}

}  // namespace tag
