#include "tag/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tag/caption_index.hpp"
#include "tag/embedding_table.hpp"
#include "tag/error.hpp"
#include "tag/evaluator.hpp"
#include "tag/parallel.hpp"
#include "tag/pipeline.hpp"
#include "tag/png_io.hpp"
#include "tag/tensor_store.hpp"
#include "tag/word_pipeline.hpp"

#ifndef TAG_BUNDLED_LEXICON
#define TAG_BUNDLED_LEXICON ""
#endif

namespace fs = std::filesystem;

namespace tag {
namespace {

std::optional<fs::path> data_dir() {
  const char* v = std::getenv("TAG_DATA_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return fs::path(v);
}

// Explicit value, else TAG_DATA_DIR/<fallback>, else an input error naming the flag.
fs::path resolve_path(const std::string& given, const std::string& flag, const std::string& fallback) {
  if (!given.empty()) return given;
  if (auto dir = data_dir()) return *dir / fallback;
  throw InputError(flag + " is required (or set TAG_DATA_DIR to a directory containing " +
                   fallback + ")");
}

std::vector<fs::path> resolve_pair(const std::vector<std::string>& given, const std::string& flag,
                                   const std::string& records, const std::string& embeddings) {
  if (!given.empty()) return {given.at(0), given.at(1)};
  return {resolve_path("", flag, records), resolve_path("", flag, embeddings)};
}

void require_exists(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw InputError(what + " not found: " + path.string());
}

fs::path resolve_lexicon(const std::string& given) {
  if (!given.empty()) return given;
  if (auto dir = data_dir(); dir && fs::exists(*dir / "lexicon.tsv")) return *dir / "lexicon.tsv";
  return TAG_BUNDLED_LEXICON;
}

void print_warnings(std::ostream& err, const std::string& prefix,
                    const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << prefix << w << "\n";
}

// ---- build-db

struct BuildDbArgs {
  std::string captions, embeddings, out, index = "exact";
  std::size_t lists = 0, probe = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

void run_build_db(const BuildDbArgs& a, std::ostream& out, std::ostream& err) {
  IndexOptions opts;
  opts.kind = parse_index_kind(a.index);
  opts.lists = a.lists;
  opts.probe = a.probe;
  opts.seed = a.seed;
  opts.workers = resolve_workers(a.threads);
  require_exists(a.captions, "captions file");
  auto db = std::make_shared<const CaptionDatabase>(
      build_database(load_text_table(a.captions, a.embeddings)));
  print_warnings(err, "", db->warnings);
  const CaptionIndex index(db, opts);
  print_warnings(err, "", index.warnings());
  save_index(index, a.out);
  out << "wrote " << to_string(index.kind()) << " index over " << db->searchable() << " of "
      << db->size() << " captions (dim " << db->dim << ")";
  if (index.kind() == IndexKind::kInvertedLists) {
    out << ", " << index.lists() << " lists, probe " << index.probe_count();
  }
  out << " to " << a.out << "\n";
}

// ---- segment

struct SegmentArgs {
  std::string dino, clip, image, name, features_dir, images_dir, db, lexicon, out;
  std::vector<std::string> word_table;
  std::size_t image_h = 448, image_w = 448, patch = 14;
  std::string upsample = "bilinear", cluster_on = "pixel";
  std::vector<std::string> disabled;
  bool per_caption = false, keep_adjectives = false, no_fallback = false;
  std::size_t freq_threshold = kDefaultFreqThreshold;
  std::size_t jobs = 1;
  unsigned threads = 1;
  PipelineConfig config;
};

struct ImageJob {
  std::string name;
  fs::path dino, clip;
  std::optional<fs::path> image;
};

std::string stem_of(const fs::path& p, const std::string& suffix) {
  std::string s = p.filename().string();
  if (s.size() > suffix.size() && s.ends_with(suffix)) s.resize(s.size() - suffix.size());
  return s;
}

std::vector<ImageJob> collect_jobs(const SegmentArgs& a) {
  std::vector<ImageJob> jobs;
  if (!a.features_dir.empty()) {
    if (!a.dino.empty() || !a.clip.empty()) {
      throw ParameterError("--features-dir cannot be combined with --dino/--clip");
    }
    if (!fs::is_directory(a.features_dir)) {
      throw InputError("features directory not found: " + a.features_dir);
    }
    for (const auto& entry : fs::directory_iterator(a.features_dir)) {
      const std::string fname = entry.path().filename().string();
      if (!fname.ends_with(".dino.tens")) continue;
      ImageJob job;
      job.name = stem_of(entry.path(), ".dino.tens");
      job.dino = entry.path();
      job.clip = fs::path(a.features_dir) / (job.name + ".clip.tens");
      require_exists(job.clip, "CLIP features for " + job.name);
      if (!a.images_dir.empty()) {
        const fs::path img = fs::path(a.images_dir) / (job.name + ".png");
        if (fs::exists(img)) job.image = img;
      }
      jobs.push_back(std::move(job));
    }
    std::sort(jobs.begin(), jobs.end(),
              [](const ImageJob& x, const ImageJob& y) { return x.name < y.name; });
    if (jobs.empty()) throw InputError("no *.dino.tens files in " + a.features_dir);
    return jobs;
  }
  if (a.dino.empty() || a.clip.empty()) {
    throw InputError("--dino and --clip are required (or use --features-dir)");
  }
  ImageJob job;
  job.dino = a.dino;
  job.clip = a.clip;
  job.name = a.name.empty() ? stem_of(job.dino, ".dino.tens") : a.name;
  if (!a.image.empty()) job.image = a.image;
  require_exists(job.dino, "DINO features");
  require_exists(job.clip, "CLIP features");
  jobs.push_back(std::move(job));
  return jobs;
}

void run_segment(SegmentArgs a, std::ostream& out, std::ostream& err) {
  PipelineConfig& cfg = a.config;
  cfg.upsample = parse_upsample_mode(a.upsample);
  cfg.cluster_on = parse_cluster_domain(a.cluster_on);
  for (const auto& stage : a.disabled) {
    if (stage == "remove") {
      cfg.words.remove = false;
    } else if (stage == "standardize") {
      cfg.words.standardize = false;
    } else if (stage == "filter") {
      cfg.words.filter = false;
    } else {
      throw ParameterError("--disable-filter expects remove, standardize or filter, got '" + stage + "'");
    }
  }
  cfg.words.filter_options.freq_threshold = a.freq_threshold;
  cfg.words.filter_options.count_mode = a.per_caption ? CountMode::kPerCaption : CountMode::kPerOccurrence;
  cfg.words.filter_options.allow_fallback = !a.no_fallback;
  cfg.words.filter_options.keep_adjectives = a.keep_adjectives;
  cfg.workers = resolve_workers(a.threads);
  cfg.validate();
  if (a.jobs < 1) throw ParameterError("--jobs must be >= 1");
  if (a.out.empty()) throw ParameterError("--out is required");

  const std::vector<ImageJob> jobs = collect_jobs(a);

  const fs::path db_dir = resolve_path(a.db, "--db", "db");
  require_exists(db_dir, "caption database");
  const CaptionIndex index = load_index(db_dir);
  if (cfg.probe != 0) CaptionIndex(index).set_probe_count(cfg.probe);

  const auto word_paths = resolve_pair(a.word_table, "--word-table", "words.jsonl", "words.tens");
  require_exists(word_paths[0], "word table records");
  const WordEmbeddingTable words(load_text_table(word_paths[0], word_paths[1]));
  if (words.dim() != index.database().dim) {
    throw InputError("word table has " + std::to_string(words.dim()) +
                     " dims but the caption database has " + std::to_string(index.database().dim));
  }

  const fs::path lexicon_path = resolve_lexicon(a.lexicon);
  if (lexicon_path.empty()) throw InputError("--lexicon is required");
  require_exists(lexicon_path, "lexicon");
  const PosLexicon lexicon = PosLexicon::load(lexicon_path);

  std::vector<std::vector<std::string>> job_warnings(jobs.size());
  std::vector<std::string> job_summary(jobs.size());
  parallel_chunks(ChunkPlan{jobs.size(), 1}, static_cast<unsigned>(a.jobs),
                  [&](std::size_t j, std::size_t, std::size_t) {
                    const ImageJob& job = jobs[j];
                    const DenseFeatureMap dino(load_tensor(job.dino), a.image_h, a.image_w,
                                               a.patch, kDinoSource);
                    const DenseFeatureMap clip(load_tensor(job.clip), a.image_h, a.image_w,
                                               a.patch, kClipSource);
                    std::optional<RgbImage> base;
                    if (job.image) {
                      base = read_rgb_png(*job.image);
                      if (base->height != a.image_h || base->width != a.image_w) {
                        throw InputError(job.image->string() + " is " +
                                         std::to_string(base->height) + "x" +
                                         std::to_string(base->width) + ", expected " +
                                         std::to_string(a.image_h) + "x" +
                                         std::to_string(a.image_w));
                      }
                    }
                    const ImageResult result = segment_image(dino, clip, index, words, lexicon, cfg);
                    write_segment_outputs(result, cfg, job.name, index, base, a.out);
                    job_warnings[j] = result.warnings;
                    std::ostringstream s;
                    s << job.name << ":";
                    for (const auto& seg : result.segments) s << " " << seg.id << "=" << seg.label.word;
                    job_summary[j] = s.str();
                  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    print_warnings(err, jobs[j].name + ": ", job_warnings[j]);
    out << job_summary[j] << "\n";
  }
}

// ---- eval

struct EvalArgs {
  std::string pred_dir, gt_dir, classes, out;
  std::vector<std::string> sbert_table;
  double sim_threshold = -1.0;
  std::vector<std::uint32_t> ignore_ids;
  bool keep_undefined_as_zero = false;
  std::size_t jobs = 1;
};

void run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.jobs < 1) throw ParameterError("--jobs must be >= 1");
  if (!fs::is_directory(a.pred_dir)) throw InputError("prediction directory not found: " + a.pred_dir);
  if (!fs::is_directory(a.gt_dir)) throw InputError("ground-truth directory not found: " + a.gt_dir);
  require_exists(a.classes, "class list");
  const ClassList classes = ClassList::load(a.classes);

  const auto sbert_paths = resolve_pair(a.sbert_table, "--sbert-table", "sbert.jsonl", "sbert.tens");
  require_exists(sbert_paths[0], "sentence table records");
  const SentenceEmbeddingTable sbert(load_text_table(sbert_paths[0], sbert_paths[1]));

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(a.pred_dir)) {
    const std::string fname = entry.path().filename().string();
    if (fname.ends_with(".labels.png")) names.push_back(stem_of(entry.path(), ".labels.png"));
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw InputError("no *.labels.png files in " + a.pred_dir);

  std::vector<ReassignedLabelMap> preds(names.size());
  std::vector<GroundTruth> gts(names.size());
  parallel_chunks(ChunkPlan{names.size(), 1}, static_cast<unsigned>(a.jobs),
                  [&](std::size_t i, std::size_t, std::size_t) {
                    const SegmentOutputs p = output_paths(a.pred_dir, names[i]);
                    preds[i] = reassign(load_label_map(p.labels, p.report), classes, sbert);
                    const fs::path gt_path = fs::path(a.gt_dir) / (names[i] + ".png");
                    require_exists(gt_path, "ground truth for " + names[i]);
                    const IndexImage gt = read_index_png(gt_path);
                    gts[i] = GroundTruth{gt.height, gt.width, gt.values};
                  });

  EvalSettings settings;
  settings.sim_threshold = a.sim_threshold;
  if (!a.ignore_ids.empty()) settings.ignore_ids = {a.ignore_ids.begin(), a.ignore_ids.end()};
  settings.keep_undefined_as_zero = a.keep_undefined_as_zero;
  settings.workers = static_cast<unsigned>(a.jobs);
  const EvalReport report = miou(preds, gts, classes, settings);

  out << report_to_table(report);
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + a.out);
    f << report_to_json(report, classes) << "\n";
  }
  if (report.evaluated_pixels == 0) err << "warning: no pixels were evaluated\n";
}

// ---- inspect-index

void run_inspect_index(const std::string& dir, bool as_json, std::ostream& out) {
  const fs::path db_dir = resolve_path(dir, "--db", "db");
  require_exists(db_dir, "caption database");
  const CaptionIndex index = load_index(db_dir);
  const CaptionDatabase& db = index.database();
  nlohmann::ordered_json j;
  j["kind"] = to_string(index.kind());
  j["rows"] = db.size();
  j["searchable"] = db.searchable();
  j["dim"] = db.dim;
  j["seed"] = index.seed();
  if (index.kind() == IndexKind::kInvertedLists) {
    std::size_t lo = db.size(), hi = 0, empty = 0;
    for (const auto& list : index.postings()) {
      lo = std::min(lo, list.size());
      hi = std::max(hi, list.size());
      if (list.empty()) ++empty;
    }
    j["lists"] = index.lists();
    j["probe"] = index.probe_count();
    j["list_size"] = {{"min", lo}, {"max", hi}, {"empty", empty}};
  }
  if (as_json) {
    out << j.dump(2) << "\n";
    return;
  }
  for (const auto& [key, value] : j.items()) out << key << ": " << value.dump() << "\n";
}

// ---- export-vocab

void run_export_vocab(const std::string& captions, const std::string& out_path, std::ostream& out) {
  require_exists(captions, "captions file");
  std::vector<std::string> texts;
  for (auto& r : load_records(captions)) texts.push_back(std::move(r.text));
  const std::vector<std::string> vocab = build_vocabulary(texts);
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + out_path);
  for (const auto& w : vocab) f << w << "\n";
  out << "wrote " << vocab.size() << " words to " << out_path << "\n";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  if (dynamic_cast<const ParameterError*>(&e)) return kExitParameter;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitInput;
  return kExitInternal;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-guidance open-vocabulary segmentation from dense features"};
  app.name("tag");
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  BuildDbArgs build;
  auto* cmd_build = app.add_subcommand("build-db", "Build a caption database and search index");
  cmd_build->add_option("--captions", build.captions, "Caption records (JSONL)")->required();
  cmd_build->add_option("--embeddings", build.embeddings, "Caption embedding tensor")->required();
  cmd_build->add_option("--index", build.index, "exact or ivf")->capture_default_str();
  cmd_build->add_option("--lists", build.lists, "IVF list count (0: ceil(sqrt(N)))");
  cmd_build->add_option("--probe", build.probe, "IVF lists probed per query (0: ceil(L/8))");
  cmd_build->add_option("--seed", build.seed, "Seed for the coarse quantizer")->capture_default_str();
  cmd_build->add_option("--threads", build.threads, "Worker threads (0: all cores)")->capture_default_str();
  cmd_build->add_option("--out", build.out, "Output directory")->required();

  SegmentArgs seg;
  auto* cmd_seg = app.add_subcommand("segment", "Segment and label images from precomputed features");
  cmd_seg->add_option("--dino", seg.dino, "DINO patch features tensor");
  cmd_seg->add_option("--clip", seg.clip, "CLIP patch features tensor");
  cmd_seg->add_option("--image", seg.image, "Image PNG used as the overlay base");
  cmd_seg->add_option("--name", seg.name, "Output stem (default: from --dino)");
  cmd_seg->add_option("--features-dir", seg.features_dir, "Batch mode: directory of <stem>.dino.tens/<stem>.clip.tens");
  cmd_seg->add_option("--images-dir", seg.images_dir, "Batch mode: directory of <stem>.png overlay bases");
  cmd_seg->add_option("--db", seg.db, "Caption database directory");
  cmd_seg->add_option("--word-table", seg.word_table, "Word records and embeddings")->expected(2);
  cmd_seg->add_option("--lexicon", seg.lexicon, "Part-of-speech lexicon");
  cmd_seg->add_option("--out", seg.out, "Output directory")->required();
  cmd_seg->add_option("--image-height", seg.image_h, "Image height in pixels")->capture_default_str();
  cmd_seg->add_option("--image-width", seg.image_w, "Image width in pixels")->capture_default_str();
  cmd_seg->add_option("--patch-size", seg.patch, "Patch size in pixels")->capture_default_str();
  cmd_seg->add_option("--clusters", seg.config.clusters, "k-means clusters")->capture_default_str();
  cmd_seg->add_option("--seed", seg.config.seed, "k-means seed")->capture_default_str();
  cmd_seg->add_option("--kmeans-max-iters", seg.config.kmeans_max_iters, "k-means iteration cap")->capture_default_str();
  cmd_seg->add_option("--kmeans-tol", seg.config.kmeans_tol, "k-means relative centre shift tolerance")->capture_default_str();
  cmd_seg->add_option("--topn", seg.config.topn, "Captions retrieved per segment")->capture_default_str();
  cmd_seg->add_option("--probe", seg.config.probe, "Override IVF probe count");
  cmd_seg->add_option("--freq-threshold", seg.freq_threshold, "Minimum word count")->capture_default_str();
  cmd_seg->add_option("--disable-filter", seg.disabled, "Skip a word stage: remove, standardize or filter");
  cmd_seg->add_option("--upsample", seg.upsample, "bilinear or nearest")->capture_default_str();
  cmd_seg->add_option("--cluster-on", seg.cluster_on, "pixel or patch")->capture_default_str();
  cmd_seg->add_flag("--count-per-caption", seg.per_caption, "Count each word once per caption");
  cmd_seg->add_flag("--keep-adjectives", seg.keep_adjectives, "Keep adjectives as candidates");
  cmd_seg->add_flag("--no-fallback", seg.no_fallback, "Never lower the frequency threshold");
  cmd_seg->add_option("--jobs", seg.jobs, "Images processed concurrently")->capture_default_str();
  cmd_seg->add_option("--threads", seg.threads, "Worker threads per image (0: all cores)")->capture_default_str();

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Score label maps against ground truth");
  cmd_eval->add_option("--pred-dir", ev.pred_dir, "Directory of segment outputs")->required();
  cmd_eval->add_option("--gt-dir", ev.gt_dir, "Directory of <stem>.png ground truth")->required();
  cmd_eval->add_option("--classes", ev.classes, "Class list")->required();
  cmd_eval->add_option("--sbert-table", ev.sbert_table, "Sentence records and embeddings")->expected(2);
  cmd_eval->add_option("--sim-threshold", ev.sim_threshold, "Drop pixels whose word similarity is below this")->capture_default_str();
  cmd_eval->add_option("--ignore-id", ev.ignore_ids, "Ground-truth ids to ignore (default 255)");
  cmd_eval->add_flag("--keep-undefined-as-zero", ev.keep_undefined_as_zero, "Count classes with no pixels as IoU 0");
  cmd_eval->add_option("--out", ev.out, "Write the JSON report here");
  cmd_eval->add_option("--jobs", ev.jobs, "Worker threads")->capture_default_str();

  std::string inspect_db;
  bool inspect_json = false;
  auto* cmd_inspect = app.add_subcommand("inspect-index", "Summarise a caption database");
  cmd_inspect->add_option("--db", inspect_db, "Caption database directory");
  cmd_inspect->add_flag("--json", inspect_json, "Print JSON");

  std::string vocab_captions, vocab_out;
  auto* cmd_vocab = app.add_subcommand("export-vocab", "Write the normalized caption vocabulary");
  cmd_vocab->add_option("--captions", vocab_captions, "Caption records (JSONL)")->required();
  cmd_vocab->add_option("--out", vocab_out, "Word list output")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kExitOk;
    return kExitParameter;
  }

  try {
    if (cmd_build->parsed()) {
      run_build_db(build, out, err);
    } else if (cmd_seg->parsed()) {
      run_segment(seg, out, err);
    } else if (cmd_eval->parsed()) {
      run_eval(ev, out, err);
    } else if (cmd_inspect->parsed()) {
      run_inspect_index(inspect_db, inspect_json, out);
    } else if (cmd_vocab->parsed()) {
      run_export_vocab(vocab_captions, vocab_out, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace tag
