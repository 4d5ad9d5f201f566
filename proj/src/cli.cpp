#include "bowl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bowl/coco.hpp"
#include "bowl/codebook.hpp"
#include "bowl/embedding_store.hpp"
#include "bowl/error.hpp"
#include "bowl/evalkit.hpp"
#include "bowl/label_io.hpp"
#include "bowl/labeler.hpp"
#include "bowl/probe.hpp"
#include "bowl/supervision.hpp"
#include "bowl/synthetic.hpp"

namespace bowl {
namespace {

namespace fs = std::filesystem;

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level_from_env() {
  const char* v = std::getenv("BOWLKIT_LOG");
  if (!v) return LogLevel::kWarn;
  const std::string s(v);
  if (s == "error" || s == "quiet") return LogLevel::kError;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kWarn;
}

class Logger {
 public:
  Logger(std::ostream& err, LogLevel level) : err_(err), level_(level) {}
  void warn(const std::string& m) const { emit(LogLevel::kWarn, "warn", m); }
  void info(const std::string& m) const { emit(LogLevel::kInfo, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::kDebug, "debug", m); }

 private:
  void emit(LogLevel l, const char* tag, const std::string& m) const {
    if (l <= level_) err_ << "bowlkit: " << tag << ": " << m << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); }

// Everything the subcommands read from flags or the config file.
struct RunConfig {
  std::string embeddings, annotations, exemplars, labels, detections, out;
  float lambda = kDefaultLambda;
  std::size_t top_n = kDefaultTopN;
  std::string gamma = "auto";
  double iou_pos = kDefaultPositiveIou;
  std::size_t budget = kDefaultBudget;
  std::vector<int> levels;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::size_t per_role_cap = 0;
  std::vector<int> strides;
  std::vector<double> scales, ratios;
  std::string similarity = "weakest";
  bool no_guard = false;
  std::vector<std::size_t> sizes{10, 100, 1000};
  double precision_iou = kNegativeGuardIou;
  double anchor_size = 0.0;
  std::string condition = "both";
  std::optional<std::size_t> probe_top_n;
  double noise = SyntheticConfig{}.noise;
  int images = SyntheticConfig{}.images;
  std::uint32_t dim = SyntheticConfig{}.dim;
  int epochs = ProbeConfig{}.epochs;
  double learning_rate = ProbeConfig{}.learning_rate;
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError("'" + path + "': no such file");
}

fs::path prepare_out_dir(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw IoError("cannot create output directory '" + path + "'");
  return fs::path(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

AnchorConfig anchor_config(const RunConfig& rc) {
  AnchorConfig ac;
  if (!rc.strides.empty()) ac.strides = rc.strides;
  if (!rc.scales.empty()) ac.scales = rc.scales;
  if (!rc.ratios.empty()) ac.aspect_ratios = rc.ratios;
  ac.validate();
  return ac;
}

GammaPolicy gamma_policy(const std::string& text) {
  if (text == "auto") return GammaPolicy::otsu();
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw ConfigError("--gamma must be 'auto' or a number, got '" + text + "'");
  GammaPolicy g = GammaPolicy::fixed(v);
  g.validate();
  return g;
}

LabelingConfig labeling_config(const RunConfig& rc) {
  LabelingConfig lc;
  lc.anchors = anchor_config(rc);
  if (!(rc.iou_pos >= 0.0 && rc.iou_pos < 1.0)) throw ConfigError("--iou-pos must lie in [0, 1)");
  lc.iou_positive = rc.iou_pos;
  lc.mining.gamma = gamma_policy(rc.gamma);
  lc.mining.levels = rc.levels;
  lc.mining.threads = std::max(1u, rc.threads);
  lc.mining.guard = !rc.no_guard;
  if (rc.similarity == "weakest") lc.mining.similarity = AnchorSimilarity::kWeakestPatch;
  else if (rc.similarity == "pooled") lc.mining.similarity = AnchorSimilarity::kPooledMean;
  else throw ConfigError("--similarity must be 'weakest' or 'pooled', got '" + rc.similarity + "'");
  for (int l : rc.levels)
    if (l < 0 || l >= int(lc.anchors.strides.size())) throw ConfigError("--levels entry " + std::to_string(l) + " out of range");
  return lc;
}

void check_lambda(float lambda) {
  if (!(lambda > -1.0f && lambda < 1.0f))
    throw ConfigError("--lambda must lie in (-1, 1), got " + fmt(lambda));
}

std::vector<GtBox> gt_boxes(const CocoDataset& coco, std::uint64_t image_id) {
  std::vector<GtBox> out;
  for (const auto& g : coco.annotations_for(image_id)) out.push_back(g.gt);
  return out;
}

const CocoImage& image_of(const CocoDataset& coco, std::uint64_t image_id) {
  const CocoImage* img = coco.find_image(image_id);
  if (!img) throw ConsistencyError("image " + std::to_string(image_id) + " has no entry in the annotations");
  return *img;
}

// ---------------------------------------------------------------- commands

int cmd_build_codebook(const RunConfig& rc, std::ostream& out, const Logger& log) {
  require_file(rc.embeddings, "--embeddings");
  check_lambda(rc.lambda);
  if (rc.top_n == 0) throw ConfigError("--top-n must be at least 1");
  const fs::path dir = prepare_out_dir(rc.out);

  EmbeddingReader reader(rc.embeddings);
  CodebookBuilder builder(reader.dim(), rc.lambda);
  std::size_t images = 0;
  while (auto grid = reader.next()) {
    builder.add_grid(*grid);
    ++images;
  }
  const std::uint64_t patches = builder.patches_seen();
  const ExemplarSet full = std::move(builder).finish();
  log.info("streamed " + std::to_string(patches) + " patches from " + std::to_string(images) + " images");

  std::optional<ExemplarSet> top;
  double coverage = 0.0;
  if (!full.empty()) {
    top = top_n(full, rc.top_n);
    // Share of patches whose nearest exemplar in the final set is in the top-N.
    std::vector<bool> in_top(full.size(), false);
    std::map<std::uint64_t, std::size_t> by_insertion;
    for (std::size_t i = 0; i < full.size(); ++i) by_insertion[full.info(i).insertion_index] = i;
    for (std::size_t i = 0; i < top->size(); ++i) in_top[by_insertion.at(top->info(i).insertion_index)] = true;
    std::uint64_t covered = 0;
    EmbeddingReader again(rc.embeddings);
    while (auto grid = again.next()) {
      normalize_grid(*grid);
      VectorMatrix q{grid->dim, std::move(grid->data)};
      for (const MaxSim& m : max_similarity_batch(q, full.embeddings(), std::max(1u, rc.threads)))
        if (m.index != kNoIndex && in_top[m.index]) ++covered;
    }
    coverage = patches == 0 ? 0.0 : double(covered) / double(patches);
  }

  const fs::path full_path = dir / "exemplars_full.bwlx";
  const fs::path top_path = dir / "exemplars.bwlx";
  save_exemplars(full, full_path);
  save_exemplars(top ? *top : full, top_path);
  if (!(load_exemplars(full_path) == full) || !(load_exemplars(top_path) == (top ? *top : full)))
    throw ConsistencyError("exemplar files did not read back identically");

  std::ostringstream summary;
  summary << "images\t" << images << '\n'
          << "patches\t" << patches << '\n'
          << "lambda\t" << fmt(rc.lambda) << '\n'
          << "exemplars\t" << full.size() << '\n'
          << "top_n\t" << (top ? top->size() : 0) << '\n'
          << "top_n_coverage\t" << fmt(coverage) << '\n';
  write_text(dir / "codebook_summary.tsv", summary.str());
  out << summary.str();
  return 0;
}

int cmd_label_anchors(const RunConfig& rc, std::ostream& out, const Logger& log) {
  require_file(rc.embeddings, "--embeddings");
  require_file(rc.annotations, "--annotations");
  require_file(rc.exemplars, "--exemplars");
  const LabelingConfig lc = labeling_config(rc);
  const fs::path dir = prepare_out_dir(rc.out);

  const ExemplarSet exemplars = load_exemplars(rc.exemplars);
  if (exemplars.empty()) throw ConfigError("exemplar file '" + rc.exemplars + "' holds no exemplars");
  const CocoDataset coco = read_coco(rc.annotations);

  std::vector<LabelRow> rows;
  std::ostringstream gammas;
  gammas << "image_id\tgamma\n";
  LabelCounts total;
  EmbeddingReader reader(rc.embeddings);
  if (reader.dim() != 0 && reader.dim() != exemplars.dim())
    throw DimensionError("embedding dim " + std::to_string(reader.dim()) + " does not match exemplar dim " +
                         std::to_string(exemplars.dim()));
  while (auto grid = reader.next()) {
    normalize_grid(*grid);
    const CocoImage& img = image_of(coco, grid->image_id);
    const auto gts = gt_boxes(coco, grid->image_id);
    const ImageLabeling labeled = label_image(*grid, img.width, img.height, gts, exemplars, lc);
    for (const auto& l : labeled.labels) rows.push_back({grid->image_id, labeled.anchors[l.anchor_index].level, l});
    const LabelCounts c = count_roles(labeled.labels);
    total.positive += c.positive;
    total.negative += c.negative;
    total.ignored += c.ignored;
    gammas << grid->image_id << '\t' << (labeled.gamma ? fmt(*labeled.gamma) : std::string("-")) << '\n';
    if (!labeled.gamma && rc.gamma == "auto")
      log.warn("image " + std::to_string(grid->image_id) + ": Otsu threshold undefined, no negatives mined");
    log.debug("image " + std::to_string(grid->image_id) + ": " + std::to_string(c.positive) + " positive, " +
              std::to_string(c.negative) + " negative");
  }

  const fs::path labels_path = dir / "labels.tsv";
  write_label_table(rows, labels_path);
  if (read_label_table(labels_path) != rows) throw ConsistencyError("label table did not read back identically");
  write_text(dir / "gamma.tsv", gammas.str());

  std::ostringstream summary;
  summary << "positive\t" << total.positive << '\n'
          << "negative\t" << total.negative << '\n'
          << "ignored\t" << total.ignored << '\n';
  write_text(dir / "label_summary.tsv", summary.str());
  out << summary.str();
  return 0;
}

int cmd_assign_targets(const RunConfig& rc, std::ostream& out, const Logger& log) {
  require_file(rc.labels, "--labels");
  require_file(rc.annotations, "--annotations");
  const AnchorConfig ac = anchor_config(rc);
  const fs::path dir = prepare_out_dir(rc.out);

  const std::vector<LabelRow> rows = read_label_table(rc.labels);
  const CocoDataset coco = read_coco(rc.annotations);

  // Group rows by image, keeping first-appearance order.
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::vector<AnchorLabel>> per_image;
  std::map<std::uint64_t, std::vector<int>> levels;
  for (const auto& r : rows) {
    auto [it, fresh] = per_image.try_emplace(r.image_id);
    if (fresh) order.push_back(r.image_id);
    it->second.push_back(r.label);
    levels[r.image_id].push_back(r.level);
  }

  std::vector<TargetRecord> records;
  AssignStats stats;
  for (std::uint64_t id : order) {
    const CocoImage& img = image_of(coco, id);
    const auto anchors = generate_anchors(img.width, img.height, ac);
    const auto& labels = per_image[id];
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t a = labels[i].anchor_index;
      if (a >= anchors.size() || anchors[a].level != levels[id][i])
        throw ConsistencyError("image " + std::to_string(id) + ": anchor " + std::to_string(a) +
                               " does not match the anchor configuration");
    }
    const auto gts = gt_boxes(coco, id);
    auto recs = assign_targets(id, labels, anchors, gts, &stats);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  if (rc.per_role_cap > 0) records = cap_per_role(records, rc.per_role_cap, rc.seed);
  if (stats.dropped_positives > 0)
    log.warn(std::to_string(stats.dropped_positives) + " positives dropped: anchor center outside matched box");

  const fs::path targets_path = dir / "targets.tsv";
  write_targets(records, targets_path);
  if (read_targets(targets_path) != records) throw ConsistencyError("targets file did not read back identically");

  std::size_t pos = 0, neg = 0;
  for (const auto& r : records) (r.role == Role::kPositive ? pos : neg)++;
  std::ostringstream summary;
  summary << "records\t" << records.size() << '\n'
          << "positive\t" << pos << '\n'
          << "negative\t" << neg << '\n'
          << "dropped_positive\t" << stats.dropped_positives << '\n';
  write_text(dir / "targets_summary.tsv", summary.str());
  out << summary.str();
  return 0;
}

std::string format_report(const ArReport& r) {
  std::ostringstream s;
  s << "metric\tvalue\n"
    << "budget\t" << r.budget << '\n'
    << "images\t" << r.images << '\n'
    << "detections\t" << r.detections << '\n'
    << "gt_base\t" << r.gt_base << '\n'
    << "gt_novel\t" << r.gt_novel << '\n'
    << "AR_A\t" << fmt(r.ar_all) << '\n'
    << "AR_N\t" << fmt(r.ar_novel) << '\n'
    << "AR_small\t" << fmt(r.ar_small) << '\n'
    << "AR_medium\t" << fmt(r.ar_medium) << '\n'
    << "AR_large\t" << fmt(r.ar_large) << '\n'
    << "AR_N_small\t" << fmt(r.ar_novel_small) << '\n'
    << "AR_N_medium\t" << fmt(r.ar_novel_medium) << '\n'
    << "AR_N_large\t" << fmt(r.ar_novel_large) << '\n';
  return s.str();
}

nlohmann::json report_json(const ArReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["budget"] = r.budget;
  j["images"] = r.images;
  j["detections"] = r.detections;
  j["gt_base"] = r.gt_base;
  j["gt_novel"] = r.gt_novel;
  j["ar_all"] = opt(r.ar_all);
  j["ar_novel"] = opt(r.ar_novel);
  j["ar_small"] = opt(r.ar_small);
  j["ar_medium"] = opt(r.ar_medium);
  j["ar_large"] = opt(r.ar_large);
  j["ar_novel_small"] = opt(r.ar_novel_small);
  j["ar_novel_medium"] = opt(r.ar_novel_medium);
  j["ar_novel_large"] = opt(r.ar_novel_large);
  j["iou_thresholds"] = kArThresholds;
  j["recall_per_threshold"] = r.recall_per_threshold;
  return j;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out, const Logger&) {
  require_file(rc.detections, "--detections");
  require_file(rc.annotations, "--annotations");
  if (rc.budget == 0) throw ConfigError("--budget must be at least 1");
  const fs::path dir = prepare_out_dir(rc.out);

  const auto dets = read_detections(rc.detections);
  const CocoDataset coco = read_coco(rc.annotations);
  const ArReport report = evaluate(dets, coco.annotations, rc.budget);

  const std::string text = format_report(report);
  std::ostringstream curve;
  curve << "iou\trecall\n";
  for (std::size_t i = 0; i < report.recall_per_threshold.size(); ++i)
    curve << fmt(kArThresholds[i]).substr(0, 4) << '\t' << fmt(report.recall_per_threshold[i]) << '\n';
  write_text(dir / "ar_report.tsv", text);
  write_text(dir / "recall_curve.tsv", curve.str());
  write_text(dir / "ar_summary.json", report_json(report).dump(1) + "\n");
  out << text;
  return 0;
}

int cmd_precision_check(const RunConfig& rc, std::ostream& out, const Logger& log) {
  require_file(rc.embeddings, "--embeddings");
  require_file(rc.annotations, "--annotations");
  require_file(rc.exemplars, "--exemplars");
  const LabelingConfig lc = labeling_config(rc);
  if (rc.sizes.empty()) throw ConfigError("--sizes needs at least one exemplar-set size");
  for (std::size_t n : rc.sizes)
    if (n == 0) throw ConfigError("--sizes entries must be at least 1");
  const fs::path dir = prepare_out_dir(rc.out);

  const ExemplarSet full = load_exemplars(rc.exemplars);
  if (full.empty()) throw ConfigError("exemplar file '" + rc.exemplars + "' holds no exemplars");
  const CocoDataset coco = read_coco(rc.annotations);
  std::vector<PatchGrid> grids = read_embeddings(rc.embeddings);
  for (auto& g : grids) normalize_grid(g);

  std::ostringstream table;
  table << "N\texemplars\tnegatives\tprecision\n";
  for (std::size_t n : rc.sizes) {
    const ExemplarSet subset = top_n(full, n);
    std::vector<NegativeAnchor> negatives;
    for (const auto& grid : grids) {
      const CocoImage& img = image_of(coco, grid.image_id);
      const auto gts = gt_boxes(coco, grid.image_id);
      const ImageLabeling labeled = label_image(grid, img.width, img.height, gts, subset, lc);
      for (const auto& l : labeled.labels) {
        if (l.role != Role::kNegative) continue;
        const Box& a = labeled.anchors[l.anchor_index].box;
        // Size filtering looks at the unclipped anchor.
        if (rc.anchor_size > 0.0 && (a.w != rc.anchor_size || a.h != rc.anchor_size)) continue;
        if (const auto c = clip(a, img.width, img.height)) negatives.push_back({grid.image_id, *c});
      }
    }
    const auto precision = negative_precision(negatives, coco.annotations, rc.precision_iou);
    if (!precision) log.warn("N=" + std::to_string(n) + ": no negatives mined");
    table << n << '\t' << subset.size() << '\t' << negatives.size() << '\t' << fmt(precision) << '\n';
  }
  write_text(dir / "precision.tsv", table.str());
  out << table.str();
  return 0;
}

SyntheticConfig synthetic_config(const RunConfig& rc) {
  SyntheticConfig sc;
  sc.seed = rc.seed;
  sc.noise = rc.noise;
  sc.images = rc.images;
  sc.dim = rc.dim;
  sc.validate();
  return sc;
}

int cmd_probe_ab(const RunConfig& rc, std::ostream& out, const Logger& log) {
  std::optional<ProbeCondition> only;
  if (rc.condition != "both") {
    only = parse_condition(rc.condition);
    if (!only) throw ConfigError("--condition must be both, with_negatives or positives_only, got '" + rc.condition + "'");
  }
  check_lambda(rc.lambda);
  const SyntheticConfig sc = synthetic_config(rc);
  ExperimentConfig ec;
  ec.probe.seed = rc.seed;
  ec.probe.epochs = rc.epochs;
  ec.probe.learning_rate = rc.learning_rate;
  ec.probe.validate();
  ec.labeling = labeling_config(rc);
  ec.budget = rc.budget;
  const fs::path dir = prepare_out_dir(rc.out);

  const SyntheticDataset ds = make_synthetic_dataset(sc);
  std::vector<PatchGrid> train;
  for (std::uint64_t id : ds.train_ids) train.push_back(ds.grid(id));
  const ExemplarSet full = build_exemplars(train, rc.lambda);
  const std::size_t n = rc.probe_top_n.value_or(std::size_t(sc.textures));
  const ExemplarSet exemplars = top_n(full, n);
  log.info("codebook: " + std::to_string(full.size()) + " exemplars, keeping " + std::to_string(exemplars.size()));

  const AbResult ab = ab_experiment(ds, exemplars, ec);
  std::string report = format_ab_report(ab, rc.seed);
  if (only) {
    std::istringstream lines(report);
    std::string line, kept;
    std::getline(lines, line);
    kept = line + '\n';
    const std::string prefix = std::string(to_string(*only)) + '\t';
    while (std::getline(lines, line))
      if (line.rfind(prefix, 0) == 0) kept += line + '\n';
    report = kept;
  }
  write_text(dir / "ab_report.tsv", report);
  out << report;
  return 0;
}

// Detections for a synthetic dataset: each GT box is jittered a little and
// scored high, and random boxes fill the rest of the budget with low scores.
std::vector<Detection> synthetic_detections(const SyntheticDataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedd5e7ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Detection> dets;
  for (const auto& img : ds.annotations.images) {
    for (const auto& g : ds.annotations.annotations_for(img.id)) {
      const Box& b = g.gt.box;
      const double dx = (unit(rng) - 0.5) * 0.2 * b.w, dy = (unit(rng) - 0.5) * 0.2 * b.h;
      const double sw = 0.9 + 0.2 * unit(rng), sh = 0.9 + 0.2 * unit(rng);
      dets.push_back({img.id, {std::round(b.x + dx), std::round(b.y + dy), std::round(b.w * sw), std::round(b.h * sh)},
                      std::round(500.0 + 500.0 * unit(rng)) / 1000.0});
    }
    for (int i = 0; i < 20; ++i) {
      const double w = 8.0 + std::floor(unit(rng) * (img.width / 2.0));
      const double h = 8.0 + std::floor(unit(rng) * (img.height / 2.0));
      const double x = std::floor(unit(rng) * (img.width - w));
      const double y = std::floor(unit(rng) * (img.height - h));
      dets.push_back({img.id, {x, y, w, h}, std::round(500.0 * unit(rng)) / 1000.0});
    }
  }
  return dets;
}

int cmd_make_synthetic(const RunConfig& rc, std::ostream& out, const Logger&) {
  const SyntheticConfig sc = synthetic_config(rc);
  const fs::path dir = prepare_out_dir(rc.out);
  const SyntheticDataset ds = make_synthetic_dataset(sc);
  write_embeddings(ds.grids, dir / "embeddings.bwle");
  write_coco(ds.annotations, dir / "annotations.json");
  write_detections(synthetic_detections(ds, rc.seed), dir / "detections.json");
  if (read_embeddings(dir / "embeddings.bwle") != ds.grids)
    throw ConsistencyError("embedding file did not read back identically");
  out << "images\t" << ds.grids.size() << '\n'
      << "annotations\t" << ds.annotations.annotations.size() << '\n'
      << "dim\t" << sc.dim << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const Logger log(err, log_level_from_env());
  RunConfig rc;

  CLI::App app{"bowlkit: background-object exemplar labeling toolkit", "bowlkit"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", rc.threads, "Worker thread cap")->capture_default_str();
  };
  auto add_anchor_flags = [&](CLI::App* c) {
    c->add_option("--strides", rc.strides, "Anchor strides per level")->delimiter(',');
    c->add_option("--scales", rc.scales, "Anchor scales per level")->delimiter(',');
    c->add_option("--ratios", rc.ratios, "Anchor aspect ratios (w/h)")->delimiter(',');
  };
  auto add_labeling_flags = [&](CLI::App* c) {
    c->add_option("--gamma", rc.gamma, "Negative threshold: auto (Otsu) or a number")->capture_default_str();
    c->add_option("--iou-pos", rc.iou_pos, "IoU above which an anchor is positive")->capture_default_str();
    c->add_option("--levels", rc.levels, "Pyramid levels mined for negatives (default all)")->delimiter(',');
    c->add_option("--similarity", rc.similarity, "Anchor similarity: weakest or pooled")->capture_default_str();
    c->add_flag("--no-guard", rc.no_guard, "Disable the GT overlap guard on negatives");
    add_anchor_flags(c);
    add_threads(c);
  };

  auto* build = app.add_subcommand("build-codebook", "Build the exemplar codebook from an embedding file");
  build->add_option("--embeddings", rc.embeddings, "BWLE embedding file");
  build->add_option("--out", rc.out, "Output directory");
  build->add_option("--lambda", rc.lambda, "Similarity below which a patch founds a new exemplar")->capture_default_str();
  build->add_option("--top-n", rc.top_n, "Size of the frequent-exemplar subset")->capture_default_str();
  add_threads(build);

  auto* label = app.add_subcommand("label-anchors", "Label anchors as positive, negative or ignored");
  label->add_option("--embeddings", rc.embeddings, "BWLE embedding file");
  label->add_option("--annotations", rc.annotations, "COCO-style annotations");
  label->add_option("--exemplars", rc.exemplars, "BWLX exemplar file");
  label->add_option("--out", rc.out, "Output directory");
  add_labeling_flags(label);

  auto* assign = app.add_subcommand("assign-targets", "Turn anchor labels into training targets");
  assign->add_option("--labels", rc.labels, "labels.tsv from label-anchors");
  assign->add_option("--annotations", rc.annotations, "COCO-style annotations");
  assign->add_option("--out", rc.out, "Output directory");
  assign->add_option("--per-role-cap", rc.per_role_cap, "Max records per image and role (0 = no cap)")
      ->capture_default_str();
  assign->add_option("--seed", rc.seed, "Sampling seed for --per-role-cap")->capture_default_str();
  add_anchor_flags(assign);

  auto* eval = app.add_subcommand("evaluate", "Average recall of a detection file");
  eval->add_option("--detections", rc.detections, "COCO results JSON");
  eval->add_option("--annotations", rc.annotations, "COCO-style annotations");
  eval->add_option("--out", rc.out, "Output directory");
  eval->add_option("--budget", rc.budget, "Detections per image")->capture_default_str();

  auto* prec = app.add_subcommand("precision-check", "Negative precision over exemplar-set sizes");
  prec->add_option("--embeddings", rc.embeddings, "BWLE embedding file");
  prec->add_option("--annotations", rc.annotations, "COCO-style annotations");
  prec->add_option("--exemplars", rc.exemplars, "Full BWLX exemplar file");
  prec->add_option("--out", rc.out, "Output directory");
  prec->add_option("--sizes", rc.sizes, "Exemplar-set sizes N")->delimiter(',');
  prec->add_option("--precision-iou", rc.precision_iou, "A negative is correct below this IoU with every GT")
      ->capture_default_str();
  prec->add_option("--anchor-size", rc.anchor_size, "Only count w == h == size anchors (0 = all)")
      ->capture_default_str();
  add_labeling_flags(prec);

  auto* ab = app.add_subcommand("probe-ab", "Linear-probe A/B: with vs without negative supervision");
  ab->add_option("--seed", rc.seed, "Dataset and probe seed")->capture_default_str();
  ab->add_option("--condition", rc.condition, "both, with_negatives or positives_only")->capture_default_str();
  ab->add_option("--out", rc.out, "Output directory");
  ab->add_option("--lambda", rc.lambda, "Codebook lambda")->capture_default_str();
  ab->add_option("--top-n", rc.probe_top_n, "Exemplar subset size (default: texture count)");
  ab->add_option("--budget", rc.budget, "Detections per image")->capture_default_str();
  ab->add_option("--noise", rc.noise, "Synthetic noise level")->capture_default_str();
  ab->add_option("--images", rc.images, "Synthetic image count")->capture_default_str();
  ab->add_option("--epochs", rc.epochs, "Gradient steps")->capture_default_str();
  ab->add_option("--lr", rc.learning_rate, "Learning rate")->capture_default_str();
  add_labeling_flags(ab);

  auto* synth = app.add_subcommand("make-synthetic", "Write a planted synthetic dataset");
  synth->add_option("--seed", rc.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", rc.out, "Output directory");
  synth->add_option("--noise", rc.noise, "Noise level")->capture_default_str();
  synth->add_option("--images", rc.images, "Image count")->capture_default_str();
  synth->add_option("--dim", rc.dim, "Embedding dimension")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "bowlkit: error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*build) return cmd_build_codebook(rc, out, log);
    if (*label) return cmd_label_anchors(rc, out, log);
    if (*assign) return cmd_assign_targets(rc, out, log);
    if (*eval) return cmd_evaluate(rc, out, log);
    if (*prec) return cmd_precision_check(rc, out, log);
    if (*ab) return cmd_probe_ab(rc, out, log);
    if (*synth) return cmd_make_synthetic(rc, out, log);
  } catch (const Error& e) {
    err << "bowlkit: error[" << e.kind() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "bowlkit: error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace bowl
