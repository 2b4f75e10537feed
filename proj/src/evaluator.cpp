#include "tag/evaluator.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tag/dense_features.hpp"
#include "tag/error.hpp"
#include "tag/parallel.hpp"

namespace tag {

ClassList::ClassList(std::vector<ClassEntry> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (!by_id_.emplace(classes_[i].id, i).second) {
      throw FormatError("classes", "duplicate class id " + std::to_string(classes_[i].id));
    }
  }
}

ClassList ClassList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open class list " + path.string());
  std::vector<ClassEntry> classes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    ClassEntry e;
    if (tab == std::string::npos) {
      e.id = static_cast<std::uint32_t>(classes.size());
      e.name = line;
    } else {
      try {
        std::size_t used = 0;
        const unsigned long id = std::stoul(line.substr(0, tab), &used);
        if (used != tab) throw std::invalid_argument("trailing characters");
        e.id = static_cast<std::uint32_t>(id);
      } catch (const std::exception&) {
        throw FormatError("classes", path.filename().string() + ":" + std::to_string(lineno) +
                                         ": bad class id");
      }
      e.name = line.substr(tab + 1);
    }
    if (e.name.empty()) {
      throw FormatError("classes", path.filename().string() + ":" + std::to_string(lineno) +
                                       ": empty class name");
    }
    classes.push_back(std::move(e));
  }
  if (classes.empty()) throw FormatError("classes", path.string() + " lists no classes");
  return ClassList(std::move(classes));
}

std::optional<std::size_t> ClassList::index_of(std::uint32_t id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void LabelMap::validate() const {
  if (ids.size() != height * width) throw InputError("label map buffer does not match its shape");
  for (std::uint32_t id : ids) {
    if (!legend.contains(id)) {
      throw InputError("label id " + std::to_string(id) + " has no legend entry");
    }
  }
}

ReassignedLabelMap reassign(const LabelMap& pred, const ClassList& classes,
                            const SentenceEmbeddingTable& table) {
  pred.validate();
  if (classes.size() == 0) throw InputError("reassign: empty class list");
  std::vector<std::span<const float>> class_emb;
  for (const auto& c : classes.entries()) {
    const auto e = table.find(c.name);
    if (!e) throw EvaluationError(c.name);
    class_emb.push_back(*e);
  }

  ReassignedLabelMap out;
  out.height = pred.height;
  out.width = pred.width;
  out.ids = pred.ids;
  for (const auto& [label, entry] : pred.legend) {
    Reassignment r;
    r.label = label;
    r.word = entry.word;
    if (!entry.degenerate) {
      const auto w = table.find(entry.word);
      if (!w) throw EvaluationError(entry.word);
      for (std::size_t c = 0; c < class_emb.size(); ++c) {
        const double s = cosine(*w, class_emb[c]).value;
        if (r.class_index == kUnassigned || s > r.similarity) {
          r.class_index = c;
          r.similarity = s;
        }
      }
    }
    out.mapping.emplace(label, std::move(r));
  }
  return out;
}

void ConfusionMatrix::add(std::size_t gt, std::size_t pred, std::uint64_t n) {
  const std::size_t col = pred == kUnassigned ? classes_ : pred;
  cells_[gt * (classes_ + 1) + col] += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw InternalError("confusion matrix size mismatch");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : cells_) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t g = 0; g < classes_; ++g) {
    if (g != c) s += at(g, c);
  }
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p <= classes_; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

std::optional<double> ConfusionMatrix::iou(std::size_t c) const {
  const std::uint64_t tp = true_positives(c);
  const std::uint64_t denom = tp + false_positives(c) + false_negatives(c);
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

ImageCounts evaluate_image(const ReassignedLabelMap& pred, const GroundTruth& gt,
                           const ClassList& classes, const EvalSettings& settings) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw InputError("prediction is " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " but ground truth is " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  if (gt.ids.size() != gt.height * gt.width || pred.ids.size() != pred.height * pred.width) {
    throw InputError("label buffer does not match its shape");
  }
  ImageCounts counts{ConfusionMatrix(classes.size())};
  for (std::size_t i = 0; i < gt.ids.size(); ++i) {
    const std::uint32_t g = gt.ids[i];
    if (settings.ignore_ids.contains(g)) {
      ++counts.ignored;
      continue;
    }
    const auto gi = classes.index_of(g);
    if (!gi) throw InputError("ground-truth id " + std::to_string(g) + " is not in the class list");
    const auto it = pred.mapping.find(pred.ids[i]);
    if (it == pred.mapping.end()) {
      throw InputError("label id " + std::to_string(pred.ids[i]) + " was never reassigned");
    }
    if (it->second.similarity < settings.sim_threshold) {
      ++counts.below_threshold;
      continue;
    }
    counts.confusion.add(*gi, it->second.class_index);
    ++counts.evaluated;
  }
  return counts;
}

EvalReport miou(std::span<const ReassignedLabelMap> preds, std::span<const GroundTruth> gts,
                const ClassList& classes, const EvalSettings& settings) {
  if (preds.size() != gts.size()) {
    throw InputError(std::to_string(preds.size()) + " predictions for " +
                     std::to_string(gts.size()) + " ground-truth maps");
  }
  std::vector<ImageCounts> per_image(preds.size());
  parallel_chunks(ChunkPlan{preds.size(), 1}, settings.workers,
                  [&](std::size_t c, std::size_t, std::size_t) {
                    per_image[c] = evaluate_image(preds[c], gts[c], classes, settings);
                  });

  EvalReport report;
  report.confusion = ConfusionMatrix(classes.size());
  report.sim_threshold = settings.sim_threshold;
  report.keep_undefined_as_zero = settings.keep_undefined_as_zero;
  report.images = preds.size();
  for (const auto& im : per_image) {
    report.confusion += im.confusion;
    report.evaluated_pixels += im.evaluated;
    report.ignored_pixels += im.ignored;
    report.below_threshold_pixels += im.below_threshold;
  }

  double sum = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    ClassScore s;
    s.id = classes[c].id;
    s.name = classes[c].name;
    s.tp = report.confusion.true_positives(c);
    s.fp = report.confusion.false_positives(c);
    s.fn = report.confusion.false_negatives(c);
    s.iou = report.confusion.iou(c);
    if (s.iou) {
      sum += *s.iou;
      ++report.classes_in_mean;
    } else if (settings.keep_undefined_as_zero) {
      ++report.classes_in_mean;
    }
    report.classes.push_back(std::move(s));
  }
  report.miou = report.classes_in_mean == 0 ? 0.0 : sum / static_cast<double>(report.classes_in_mean);

  std::map<std::string, Reassignment> words;
  for (const auto& p : preds) {
    for (const auto& [label, r] : p.mapping) words.emplace(r.word, r);
  }
  for (auto& [word, r] : words) report.reassignments.push_back(r);
  return report;
}

std::string report_to_json(const EvalReport& report, const ClassList& classes) {
  nlohmann::ordered_json j;
  j["miou"] = report.miou;
  j["classes_in_mean"] = report.classes_in_mean;
  j["sim_threshold"] = report.sim_threshold;
  j["keep_undefined_as_zero"] = report.keep_undefined_as_zero;
  j["images"] = report.images;
  j["pixels"] = {{"evaluated", report.evaluated_pixels},
                 {"ignored", report.ignored_pixels},
                 {"below_threshold", report.below_threshold_pixels}};
  auto& per_class = j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& s : report.classes) {
    nlohmann::ordered_json c;
    c["id"] = s.id;
    c["name"] = s.name;
    c["iou"] = s.iou ? nlohmann::ordered_json(*s.iou) : nlohmann::ordered_json(nullptr);
    c["tp"] = s.tp;
    c["fp"] = s.fp;
    c["fn"] = s.fn;
    per_class.push_back(std::move(c));
  }
  auto& table = j["reassignment"] = nlohmann::ordered_json::array();
  for (const auto& r : report.reassignments) {
    nlohmann::ordered_json e;
    e["word"] = r.word;
    if (r.class_index == kUnassigned) {
      e["class"] = nullptr;
    } else {
      e["class"] = classes[r.class_index].name;
    }
    e["similarity"] = r.similarity;
    table.push_back(std::move(e));
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[160];
  out << "class                          IoU        TP          FP          FN\n";
  for (const auto& s : report.classes) {
    if (s.iou) {
      std::snprintf(buf, sizeof(buf), "%-28s %6.2f %11llu %11llu %11llu\n", s.name.c_str(),
                    100.0 * *s.iou, static_cast<unsigned long long>(s.tp),
                    static_cast<unsigned long long>(s.fp), static_cast<unsigned long long>(s.fn));
    } else {
      std::snprintf(buf, sizeof(buf), "%-28s %6s %11s %11s %11s\n", s.name.c_str(), "-", "-", "-",
                    "-");
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU %.2f over %zu classes (threshold %.2f, %zu images)\n",
                100.0 * report.miou, report.classes_in_mean, report.sim_threshold,
                report.images);
  out << buf;
  return out.str();
}

}  // namespace tag
