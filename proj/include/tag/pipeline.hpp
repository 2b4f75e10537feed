#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tag/caption_index.hpp"
#include "tag/dense_features.hpp"
#include "tag/evaluator.hpp"
#include "tag/png_io.hpp"
#include "tag/segmenter.hpp"
#include "tag/word_pipeline.hpp"

namespace tag {

enum class ClusterDomain { kPixel, kPatch };

ClusterDomain parse_cluster_domain(const std::string& name);  // "pixel" | "patch"

struct PipelineConfig {
  std::size_t clusters = kDefaultClusters;
  std::size_t topn = kDefaultTopN;
  std::uint64_t seed = 0;
  std::size_t kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;
  UpsampleMode upsample = UpsampleMode::kBilinear;
  ClusterDomain cluster_on = ClusterDomain::kPixel;
  WordPipelineOptions words;
  std::size_t probe = 0;  // 0 keeps the probe count stored with the index
  unsigned workers = 1;

  /// Throws ParameterError for counts below 1.
  void validate() const;
};

struct SegmentRecord {
  std::size_t id = 0;
  std::size_t pixels = 0;
  RetrievalResult retrieval;
  CandidateWordSet candidates;
  SegmentLabel label;
};

struct ImageResult {
  SegmentPartition partition;
  std::vector<SegmentRecord> segments;
  std::vector<std::string> warnings;

  /// Label ids are segment ids; the legend carries each segment's word.
  LabelMap label_map() const;
};

/// Full per-image pipeline: upsample both maps, cluster the DINO features,
/// pool the CLIP features per segment, retrieve captions, extract candidate
/// words and assign the best one to each segment.
ImageResult segment_image(const DenseFeatureMap& dino, const DenseFeatureMap& clip,
                          const CaptionIndex& index, const WordEmbeddingTable& words,
                          const PosLexicon& lexicon, const PipelineConfig& config);

std::string segment_report_json(const ImageResult& result, const PipelineConfig& config,
                                const std::string& name, const CaptionIndex& index);

/// Output files of one segmented image.
struct SegmentOutputs {
  std::filesystem::path labels;   // 16-bit label id PNG
  std::filesystem::path report;   // JSON report with legend
  std::filesystem::path overlay;  // colour overlay PNG
};

SegmentOutputs output_paths(const std::filesystem::path& dir, const std::string& name);

void write_segment_outputs(const ImageResult& result, const PipelineConfig& config,
                           const std::string& name, const CaptionIndex& index,
                           const std::optional<RgbImage>& base,
                           const std::filesystem::path& dir);

/// Reads a label PNG and the legend from its report.
LabelMap load_label_map(const std::filesystem::path& labels_png,
                        const std::filesystem::path& report_json);

}  // namespace tag
