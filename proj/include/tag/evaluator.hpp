#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tag/embedding_table.hpp"

namespace tag {

inline constexpr std::uint32_t kIgnoreId = 255;

struct ClassEntry {
  std::uint32_t id = 0;
  std::string name;
};

/// Ground-truth class list of a dataset, in evaluation order.
class ClassList {
 public:
  ClassList() = default;
  explicit ClassList(std::vector<ClassEntry> classes);

  /// Lines `id<TAB>name`, or bare names numbered from 0 in file order.
  /// Blank lines and lines starting with '#' are skipped.
  static ClassList load(const std::filesystem::path& path);

  std::size_t size() const { return classes_.size(); }
  const ClassEntry& operator[](std::size_t i) const { return classes_[i]; }
  const std::vector<ClassEntry>& entries() const { return classes_; }
  std::optional<std::size_t> index_of(std::uint32_t id) const;

 private:
  std::vector<ClassEntry> classes_;
  std::map<std::uint32_t, std::size_t> by_id_;
};

struct LegendEntry {
  std::string word;
  bool degenerate = false;  // segment had no usable label
};

/// Predicted label ids per pixel plus the word behind every id.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> ids;
  std::map<std::uint32_t, LegendEntry> legend;

  /// Throws InputError if an id in the grid is missing from the legend.
  void validate() const;
};

inline constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

struct Reassignment {
  std::uint32_t label = 0;
  std::string word;
  std::size_t class_index = kUnassigned;  // kUnassigned for degenerate labels
  double similarity = -1.0;
};

/// Label map whose every label id has been mapped onto a ground-truth class.
struct ReassignedLabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> ids;
  std::map<std::uint32_t, Reassignment> mapping;
};

/// Maps each predicted word onto the class whose sentence embedding is most
/// similar (ties to the earlier class). Degenerate labels stay unassigned
/// with similarity -1. Throws EvaluationError naming any missing word.
ReassignedLabelMap reassign(const LabelMap& pred, const ClassList& classes,
                            const SentenceEmbeddingTable& table);

/// Rows are ground-truth classes, columns predicted classes plus one final
/// column for pixels whose segment carries no class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0)
      : classes_(classes), cells_(classes * (classes + 1), 0) {}

  std::size_t classes() const { return classes_; }
  void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1);
  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return cells_[gt * (classes_ + 1) + pred];
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  std::uint64_t total() const;

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t false_positives(std::size_t c) const;
  std::uint64_t false_negatives(std::size_t c) const;
  /// Undefined (nullopt) when the class never occurs in prediction or truth.
  std::optional<double> iou(std::size_t c) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> cells_;
};

struct GroundTruth {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> ids;
};

struct EvalSettings {
  double sim_threshold = -1.0;   // segments below are treated as ignore
  std::set<std::uint32_t> ignore_ids{kIgnoreId};
  bool keep_undefined_as_zero = false;
  unsigned workers = 1;
};

struct ImageCounts {
  ConfusionMatrix confusion;
  std::uint64_t evaluated = 0;
  std::uint64_t ignored = 0;           // ground truth marked ignore
  std::uint64_t below_threshold = 0;   // excluded by the similarity threshold
};

ImageCounts evaluate_image(const ReassignedLabelMap& pred, const GroundTruth& gt,
                           const ClassList& classes, const EvalSettings& settings);

struct ClassScore {
  std::uint32_t id = 0;
  std::string name;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  std::optional<double> iou;
};

struct EvalReport {
  std::vector<ClassScore> classes;
  double miou = 0.0;
  std::size_t classes_in_mean = 0;
  double sim_threshold = -1.0;
  bool keep_undefined_as_zero = false;
  std::size_t images = 0;
  std::uint64_t evaluated_pixels = 0;
  std::uint64_t ignored_pixels = 0;
  std::uint64_t below_threshold_pixels = 0;
  std::vector<Reassignment> reassignments;  // one per distinct word
  ConfusionMatrix confusion;
};

/// Accumulates a confusion matrix over all pairs and reports per-class IoU =
/// TP / (TP + FP + FN). Classes that never occur are left out of the mean
/// unless keep_undefined_as_zero is set.
EvalReport miou(std::span<const ReassignedLabelMap> preds, std::span<const GroundTruth> gts,
                const ClassList& classes, const EvalSettings& settings);

std::string report_to_json(const EvalReport& report, const ClassList& classes);
std::string report_to_table(const EvalReport& report);

}  // namespace tag
