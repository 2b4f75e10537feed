#include "tag/pipeline.hpp"

#include <fstream>

#include "json.hpp"
#include "tag/error.hpp"
#include "tag/render.hpp"

namespace tag {

ClusterDomain parse_cluster_domain(const std::string& name) {
  if (name == "pixel") return ClusterDomain::kPixel;
  if (name == "patch") return ClusterDomain::kPatch;
  throw ParameterError("unknown cluster domain '" + name + "' (expected pixel or patch)");
}

void PipelineConfig::validate() const {
  if (clusters < 1) throw ParameterError("--clusters must be >= 1");
  if (topn < 1) throw ParameterError("--topn must be >= 1");
  if (words.filter_options.freq_threshold < 1) throw ParameterError("--freq-threshold must be >= 1");
  if (kmeans_max_iters < 1) throw ParameterError("--kmeans-max-iters must be >= 1");
  if (!(kmeans_tol >= 0.0)) throw ParameterError("--kmeans-tol must be >= 0");
}

LabelMap ImageResult::label_map() const {
  LabelMap map;
  map.height = partition.height;
  map.width = partition.width;
  map.ids = partition.assignment;
  for (const auto& s : segments) {
    map.legend[static_cast<std::uint32_t>(s.id)] = {s.label.word, s.label.degenerate};
  }
  return map;
}

ImageResult segment_image(const DenseFeatureMap& dino, const DenseFeatureMap& clip,
                          const CaptionIndex& index, const WordEmbeddingTable& words,
                          const PosLexicon& lexicon, const PipelineConfig& config) {
  config.validate();
  if (dino.image_h() != clip.image_h() || dino.image_w() != clip.image_w()) {
    throw InputError("DINO and CLIP features describe different image sizes");
  }
  if (clip.dim() != index.database().dim) {
    throw InputError("CLIP features have " + std::to_string(clip.dim()) +
                     " dims but the caption database has " +
                     std::to_string(index.database().dim));
  }

  KMeansOptions km;
  km.seed = config.seed;
  km.max_iters = config.kmeans_max_iters;
  km.tol = config.kmeans_tol;
  km.workers = config.workers;

  ImageResult result;
  if (config.cluster_on == ClusterDomain::kPatch) {
    result.partition = kmeans_patch_grid(dino, config.clusters, km);
  } else {
    result.partition = kmeans(upsample(dino, config.upsample, config.workers), config.clusters, km);
  }
  for (const auto& w : result.partition.warnings) result.warnings.push_back("k-means: " + w);

  const PixelFeatureMap clip_pixels = upsample(clip, config.upsample, config.workers);
  const SegmentEmbeddings pooled = pool_segments(result.partition, clip_pixels, config.workers);

  CaptionIndex probe_index = index;
  if (config.probe != 0) probe_index.set_probe_count(config.probe);

  for (std::size_t k = 0; k < pooled.k; ++k) {
    SegmentRecord rec;
    rec.id = k;
    rec.pixels = result.partition.counts[k];
    rec.retrieval = probe_index.top_n(pooled.row(k), config.topn);
    std::vector<std::string> captions;
    for (const auto& h : rec.retrieval.hits) captions.push_back(h.text);
    rec.candidates = extract_candidates(captions, config.words, lexicon);
    rec.candidates.segment = k;
    rec.label = assign_category(rec.candidates, pooled.row(k), words);
    for (const auto& w : rec.label.warnings) {
      result.warnings.push_back("segment " + std::to_string(k) + ": " + w);
    }
    result.segments.push_back(std::move(rec));
  }
  return result;
}

std::string segment_report_json(const ImageResult& result, const PipelineConfig& config,
                                const std::string& name, const CaptionIndex& index) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["name"] = name;
  j["height"] = result.partition.height;
  j["width"] = result.partition.width;

  auto& c = j["config"];
  c["clusters"] = config.clusters;
  c["effective_clusters"] = result.partition.k;
  c["topn"] = config.topn;
  c["freq_threshold"] = config.words.filter_options.freq_threshold;
  c["count_mode"] = config.words.filter_options.count_mode == CountMode::kPerOccurrence
                        ? "occurrence"
                        : "caption";
  c["fallback"] = config.words.filter_options.allow_fallback;
  c["keep_adjectives"] = config.words.filter_options.keep_adjectives;
  c["stages"] = {{"remove", config.words.remove},
                 {"standardize", config.words.standardize},
                 {"filter", config.words.filter}};
  c["seed"] = config.seed;
  c["kmeans_max_iters"] = config.kmeans_max_iters;
  c["kmeans_tol"] = config.kmeans_tol;
  c["upsample"] = config.upsample == UpsampleMode::kBilinear ? "bilinear" : "nearest";
  c["cluster_on"] = config.cluster_on == ClusterDomain::kPixel ? "pixel" : "patch";
  c["index"] = to_string(index.kind());
  if (index.kind() == IndexKind::kInvertedLists) {
    c["lists"] = index.lists();
    c["probe"] = config.probe != 0 ? config.probe : index.probe_count();
  }

  j["warnings"] = result.warnings;
  auto& legend = j["legend"] = ordered_json::array();
  auto& segments = j["segments"] = ordered_json::array();
  for (const auto& s : result.segments) {
    legend.push_back({{"id", s.id}, {"word", s.label.word}, {"degenerate", s.label.degenerate}});
    ordered_json seg;
    seg["id"] = s.id;
    seg["pixels"] = s.pixels;
    seg["word"] = s.label.word;
    seg["score"] = s.label.score;
    seg["degenerate"] = s.label.degenerate;
    seg["effective_threshold"] = s.candidates.effective_threshold;
    seg["fallback_used"] = s.candidates.fallback_used;
    auto& cands = seg["candidates"] = ordered_json::array();
    for (const auto& w : s.candidates.words) cands.push_back({{"word", w.word}, {"count", w.count}});
    auto& caps = seg["captions"] = ordered_json::array();
    for (const auto& h : s.retrieval.hits) {
      caps.push_back({{"row", h.row}, {"text", h.text}, {"score", h.score}});
    }
    seg["warnings"] = s.label.warnings;
    segments.push_back(std::move(seg));
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

SegmentOutputs output_paths(const std::filesystem::path& dir, const std::string& name) {
  return {dir / (name + ".labels.png"), dir / (name + ".json"), dir / (name + ".overlay.png")};
}

void write_segment_outputs(const ImageResult& result, const PipelineConfig& config,
                           const std::string& name, const CaptionIndex& index,
                           const std::optional<RgbImage>& base,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SegmentOutputs out = output_paths(dir, name);

  IndexImage labels{result.partition.height, result.partition.width, result.partition.assignment};
  write_index_png(out.labels, labels);

  std::ofstream report(out.report, std::ios::binary | std::ios::trunc);
  if (!report) throw InputError("cannot write " + out.report.string());
  report << segment_report_json(result, config, name, index);
  if (!report) throw InputError("failed writing " + out.report.string());

  std::vector<LegendLine> legend;
  for (const auto& s : result.segments) {
    legend.push_back({static_cast<std::uint32_t>(s.id), std::to_string(s.id) + " " + s.label.word});
  }
  write_rgb_png(out.overlay, render_overlay(labels.height, labels.width, labels.values, legend, base));
}

LabelMap load_label_map(const std::filesystem::path& labels_png,
                        const std::filesystem::path& report_json) {
  const IndexImage img = read_index_png(labels_png);
  std::ifstream in(report_json);
  if (!in) throw InputError("missing segment report " + report_json.string());
  LabelMap map;
  map.height = img.height;
  map.width = img.width;
  map.ids = img.values;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("legend")) {
      map.legend[e.at("id").get<std::uint32_t>()] = {e.at("word").get<std::string>(),
                                                      e.at("degenerate").get<bool>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("report", report_json.filename().string() + ": " + e.what());
  }
  map.validate();
  return map;
}

}  // namespace tag
