// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bowl/cli.hpp"
#include "bowl/codebook.hpp"
#include "bowl/evalkit.hpp"
#include "bowl/labeler.hpp"
#include "bowl/probe.hpp"
#include "bowl/similarity.hpp"
#include "bowl/supervision.hpp"
#include "bowl/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace bowl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Outcome codebook_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  const float lambdas[] = {0.1f, 0.2f, 0.5f};
  int streams = 0, mismatches = 0;
  for (int s = 0; s < 24; ++s) {
    const float lambda = lambdas[s % 3];
    const std::uint32_t d = 2 + std::uint32_t(rng() % 15);
    const std::size_t n = 1 + rng() % 1000;
    // Raw vectors go into grids of random width; the reference sees the same
    // vectors after normalization, in row-major stream order.
    std::normal_distribution<float> z(0.0f, 1.0f);
    std::vector<PatchGrid> grids;
    std::vector<std::vector<float>> stream;
    std::vector<std::size_t> first_index;
    std::size_t done = 0;
    for (std::uint64_t id = 1; done < n; ++id) {
      const std::uint32_t w = std::uint32_t(std::min<std::size_t>(1 + rng() % 40, n - done));
      PatchGrid g{id, 1, w, 16, 8, d, {}};
      for (std::uint32_t c = 0; c < w; ++c) {
        std::vector<float> v(d);
        // Every fifth vector repeats an earlier one so that ties occur.
        if (!stream.empty() && rng() % 5 == 0) v = stream[rng() % stream.size()];
        else
          for (auto& x : v) x = z(rng);
        g.data.insert(g.data.end(), v.begin(), v.end());
        stream.push_back(normalize(v));
      }
      first_index.push_back(done);
      done += w;
      grids.push_back(std::move(g));
    }
    const auto ref = oracle::naive_codebook(stream, lambda);
    const auto got = build_exemplars(grids, lambda);
    bool same = got.size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) {
      const auto& p = got.info(i).provenance;
      const std::size_t index = first_index[p.image_id - 1] + p.col;
      same = index == ref[i].stream_index && got.info(i).count == ref[i].count && got.info(i).insertion_index == i;
      const auto e = got.embedding(i);
      same = same && std::equal(e.begin(), e.end(), stream[index].begin());
    }
    mismatches += !same;
    ++streams;
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && dt < 5.0, format("%d streams, %d mismatched, %.2f s (limit 5 s)", streams, mismatches, dt)};
}

Outcome iou_oracle() {
  std::mt19937_64 rng(17);
  auto rnd = [&](int lo, int hi) { return lo + int(rng() % unsigned(hi - lo + 1)); };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const oracle::IntBox a{rnd(0, 40), rnd(0, 40), rnd(1, 30), rnd(1, 30)};
    const oracle::IntBox b{rnd(0, 40), rnd(0, 40), rnd(1, 30), rnd(1, 30)};
    const double got = iou(Box{double(a.x), double(a.y), double(a.w), double(a.h)},
                           Box{double(b.x), double(b.y), double(b.w), double(b.h)});
    worst = std::max(worst, std::abs(got - oracle::raster_iou(a, b)));
  }
  return {worst <= 1e-9, format("1000 pairs, max |error| %.3g (limit 1e-9)", worst)};
}

Outcome otsu_oracle() {
  std::mt19937_64 rng(99);
  int sets = 0, mismatches = 0;
  while (sets < 100) {
    std::vector<float> v;
    const int n = 2 + int(rng() % 2000);
    std::normal_distribution<float> lo(0.15f, 0.08f), hi(0.8f, 0.05f);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int i = 0; i < n; ++i) {
      switch (sets % 3) {
        case 0: v.push_back(u(rng)); break;
        case 1: v.push_back(rng() % 4 ? lo(rng) : hi(rng)); break;
        default: v.push_back(float(int(rng() % 9)) / 8.0f);  // heavy ties
      }
    }
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    if (*mn == *mx) continue;
    const int bin = otsu_bin(v);
    const int ref = oracle::exhaustive_otsu_bin(v, 256);
    const double gamma = otsu_gamma(v);
    mismatches += bin != ref || gamma != *mn + ref * (double(*mx) - *mn) / 256;
    ++sets;
  }
  return {mismatches == 0, format("%d score sets, %d bins differ", sets, mismatches)};
}

bool same_optional(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

Outcome ar_oracle() {
  std::mt19937_64 rng(5150);
  int mismatches = 0, comparisons = 0;
  for (int f = 0; f < 50; ++f) {
    const auto fx = oracle::random_ar_fixture(rng);
    std::vector<GtRecord> base, novel;
    oracle::split_base_novel(fx.gts, base, novel);
    for (std::size_t k : {std::size_t(1), std::size_t(3), std::size_t(100)}) {
      for (double t : kArThresholds) {
        mismatches += !same_optional(recall_at(fx.dets, fx.gts, k, t), oracle::recall(fx.dets, fx.gts, k, t));
        ++comparisons;
      }
      mismatches += !same_optional(average_recall(fx.dets, fx.gts, k), oracle::average_recall(fx.dets, fx.gts, k));
      mismatches += !same_optional(ar_novel(fx.dets, base, novel, k), oracle::ar_novel(fx.dets, base, novel, k));
      comparisons += 2;
    }
  }
  return {mismatches == 0, format("50 fixtures, %d comparisons, %d differ", comparisons, mismatches)};
}

Outcome loss_degeneracy() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 3.0);
  int differ = 0;
  for (int f = 0; f < 100; ++f) {
    std::vector<PredictionRecord> preds;
    std::vector<TargetRecord> targets;
    const int n = int(rng() % 50);
    for (int i = 0; i < n; ++i) {
      const Ltrb d{1 + 20 * u(rng), 1 + 20 * u(rng), 1 + 20 * u(rng), 1 + 20 * u(rng)};
      preds.push_back({2, std::uint64_t(i), z(rng), Ltrb{d.l + z(rng), d.r + z(rng), d.t + z(rng), d.b + z(rng)}});
      targets.push_back({2, std::uint64_t(i), Role::kPositive, d, u(rng)});
    }
    const auto b = bowl_loss(preds, targets);
    const auto o = oln_loss(preds, targets);
    differ += std::memcmp(&b.total, &o.total, sizeof(double)) != 0 ||
              std::memcmp(&b.objectness, &o.objectness, sizeof(double)) != 0 ||
              std::memcmp(&b.regression, &o.regression, sizeof(double)) != 0;
  }
  return {differ == 0, format("100 fixtures without negatives, %d differ bitwise", differ)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 2.0);
  double worst = 0.0;
  int logits = 0;
  for (int f = 0; f < 20; ++f) {
    std::vector<PredictionRecord> preds;
    std::vector<TargetRecord> targets;
    const int n = 1 + int(rng() % 30);
    for (int i = 0; i < n; ++i) {
      preds.push_back({1, std::uint64_t(i), z(rng), Ltrb{2, 2, 2, 2}});
      if (rng() % 3 == 0) targets.push_back({1, std::uint64_t(i), Role::kNegative, std::nullopt, 0.0});
      else targets.push_back({1, std::uint64_t(i), Role::kPositive, Ltrb{2, 2, 2, 2}, u(rng)});
    }
    const auto grad = objectness_loss_gradient(preds, targets);
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6;
      auto plus = preds, minus = preds;
      plus[k].objectness_logit += h;
      minus[k].objectness_logit -= h;
      const double fd = (objectness_loss(plus, targets) - objectness_loss(minus, targets)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-12}));
      ++logits;
    }
  }
  return {worst <= 1e-4, format("20 fixtures, %d logits, max relative error %.3g (limit 1e-4)", logits, worst)};
}

// Default exemplar set of the synthetic experiments: the most frequent
// exemplars of the training split, one per texture.
ExemplarSet synthetic_exemplars(const SyntheticDataset& ds, const SyntheticConfig& sc) {
  std::vector<PatchGrid> train;
  for (auto id : ds.train_ids) train.push_back(ds.grid(id));
  return top_n(build_exemplars(train, kDefaultLambda), std::size_t(sc.textures));
}

std::optional<double> planted_precision(std::uint64_t seed, double noise) {
  SyntheticConfig sc;
  sc.seed = seed;
  sc.noise = noise;
  const auto ds = make_synthetic_dataset(sc);
  const auto ex = synthetic_exemplars(ds, sc);
  const LabelingConfig lc;
  std::vector<NegativeAnchor> negatives;
  for (const PatchGrid& raw : ds.grids) {
    PatchGrid g = raw;
    normalize_grid(g);
    std::vector<GtBox> gts;
    for (const auto& a : ds.annotations.annotations_for(g.image_id)) gts.push_back(a.gt);
    const auto labeled = label_image(g, sc.image_size, sc.image_size, gts, ex, lc);
    for (const auto& l : labeled.labels)
      if (l.role == Role::kNegative)
        if (const auto box = clip(labeled.anchors[l.anchor_index].box, sc.image_size, sc.image_size))
          negatives.push_back({g.image_id, *box});
  }
  return negative_precision(negatives, ds.annotations.annotations, kNegativeGuardIou);
}

Outcome planted_precision_check() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (double noise : {0.0, 0.05, 0.2}) {
    double worst = 1.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = planted_precision(seed, noise);
      const double v = p.value_or(-1.0);
      worst = std::min(worst, v);
      ok = ok && (noise <= 0.05 ? v == 1.0 : v >= 0.95);
    }
    detail += format("noise %.2f min %.4f; ", noise, worst);
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 30.0;
  return {ok, detail + format("5 seeds each, %.1f s (limit 30 s)", dt)};
}

Outcome directional_ab() {
  const auto t0 = Clock::now();
  int wins = 0;
  double sum = 0.0;
  std::string deltas;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig sc;
    sc.seed = seed;
    const auto ds = make_synthetic_dataset(sc);
    ExperimentConfig ec;
    ec.probe.seed = seed;
    const auto r = ab_experiment(ds, synthetic_exemplars(ds, sc), ec);
    const double d = r.with_negatives.ar_novel.value_or(0.0) - r.positives_only.ar_novel.value_or(0.0);
    const bool defined = r.with_negatives.ar_novel && r.positives_only.ar_novel;
    wins += defined && d >= 0.0;
    sum += d;
    deltas += format("%+.3f ", d);
  }
  const double dt = seconds_since(t0);
  const double mean = sum / 5.0;
  return {wins == 5 && mean > 0.0 && dt < 60.0,
          format("AR_N deltas %s| %d/5 non-negative, mean %+.4f, %.1f s (limit 60 s)", deltas.c_str(), wins, mean, dt)};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bowlkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome pipeline_smoke() {
  const fs::path fixture = fs::path(BOWL_FIXTURE_DIR) / "synthetic";
  const std::string emb = (fixture / "embeddings.bwle").string();
  const std::string ann = (fixture / "annotations.json").string();
  testutil::TempDir dir("accept");
  for (const char* run : {"a", "b"}) {
    const std::string root = (dir / run).string();
    const int codes[] = {
        cli({"build-codebook", "--embeddings", emb, "--out", root + "/codebook"}),
        cli({"label-anchors", "--embeddings", emb, "--annotations", ann, "--exemplars",
             root + "/codebook/exemplars.bwlx", "--out", root + "/labels"}),
        cli({"assign-targets", "--labels", root + "/labels/labels.tsv", "--annotations", ann, "--out",
             root + "/targets", "--per-role-cap", "64", "--seed", "3"}),
        cli({"evaluate", "--detections", (fixture / "detections.json").string(), "--annotations", ann, "--out",
             root + "/eval"}),
    };
    for (int c : codes)
      if (c != 0) return {false, format("a step exited with %d", c)};
  }
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path twin = dir / "b" / fs::relative(e.path(), dir / "a");
    ++files;
    differ += testutil::slurp(e.path()) != testutil::slurp(twin);
  }
  return {files > 0 && differ == 0, format("4 steps exit 0 twice, %zu output files, %zu differ", files, differ)};
}

Outcome throughput() {
  constexpr std::uint32_t d = 384;
  std::mt19937_64 rng(4);
  std::normal_distribution<float> z(0.0f, 1.0f);
  auto unit_rows = [&](std::size_t n) {
    VectorMatrix m{d, std::vector<float>(n * d)};
    for (auto& x : m.data) x = z(rng);
    for (std::size_t i = 0; i < n; ++i) normalize_in_place(std::span<float>(m.data.data() + i * d, d));
    return m;
  };
  const VectorMatrix queries = unit_rows(100000);
  const VectorMatrix exemplars = unit_rows(1000);
  const auto t0 = Clock::now();
  const auto result = max_similarity_batch(queries, exemplars, 1);
  const double dt = seconds_since(t0);
  // Spot-check against a plain double-precision scan.
  int wrong = 0;
  for (std::size_t q = 0; q < queries.rows(); q += 997) {
    double best = -2.0;
    for (std::size_t e = 0; e < exemplars.rows(); ++e) {
      double s = 0.0;
      for (std::uint32_t k = 0; k < d; ++k) s += double(queries.row(q)[k]) * exemplars.row(e)[k];
      best = std::max(best, s);
    }
    wrong += std::abs(best - result[q].similarity) > 1e-5;
  }
  return {dt < 10.0 && wrong == 0,
          format("100000 x 1000 x d=384 on one thread in %.2f s (limit 10 s), %d spot checks off", dt, wrong)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"codebook-oracle", codebook_oracle},
      {"iou-oracle", iou_oracle},
      {"otsu-oracle", otsu_oracle},
      {"ar-oracle", ar_oracle},
      {"loss-degeneracy", loss_degeneracy},
      {"gradient-check", gradient_check},
      {"planted-precision", planted_precision_check},
      {"directional-ab", directional_ab},
      {"pipeline-smoke", pipeline_smoke},
      {"throughput", throughput},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
