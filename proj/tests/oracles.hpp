#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Each one is written for clarity over speed and shares no code path
// with the library beyond plain types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "bowl/evalkit.hpp"
#include "bowl/geometry.hpp"
#include "bowl/similarity.hpp"

namespace oracle {

struct NaiveExemplar {
  std::size_t stream_index;
  std::uint64_t count;
};

// Sequential greedy selection over unit vectors. Similarity goes through
// bowl::dot so both sides agree on float rounding.
inline std::vector<NaiveExemplar> naive_codebook(const std::vector<std::vector<float>>& stream, float lambda) {
  std::vector<NaiveExemplar> out;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    float best = -INFINITY;
    std::size_t arg = 0;
    for (std::size_t e = 0; e < out.size(); ++e) {
      const float s = bowl::dot(stream[t], stream[out[e].stream_index]);
      if (s > best) {
        best = s;
        arg = e;
      }
    }
    if (out.empty() || best < lambda) out.push_back({t, 1});
    else ++out[arg].count;
  }
  return out;
}

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0.0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = float(v[i] / std::sqrt(s));
  return out;
}

struct IntBox {
  int x, y, w, h;
};

// IoU by counting unit pixels.
inline double raster_iou(const IntBox& a, const IntBox& b) {
  const int x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.x + a.w, b.x + b.w), y1 = std::max(a.y + a.h, b.y + b.h);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
      const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// Otsu by trying every edge and computing w0 w1 (mu0 - mu1)^2 directly.
inline int exhaustive_otsu_bin(const std::vector<float>& values, int bins) {
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  std::vector<long> hist(bins, 0);
  for (float v : values) ++hist[std::min(bins - 1, int((v - lo) * (bins / (hi - lo))))];
  const long double n = values.size();
  long double best = -1.0L;
  int arg = 1;
  for (int k = 1; k < bins; ++k) {
    long double c0 = 0, c1 = 0, m0 = 0, m1 = 0;
    for (int b = 0; b < bins; ++b) {
      if (b < k) {
        c0 += hist[b];
        m0 += (long double)hist[b] * b;
      } else {
        c1 += hist[b];
        m1 += (long double)hist[b] * b;
      }
    }
    if (c0 == 0 || c1 == 0) continue;
    const long double w0 = c0 / n, w1 = c1 / n;
    const long double d = m0 / c0 - m1 / c1;
    const long double var = w0 * w1 * d * d;
    if (var > best * (1.0L + 1e-15L)) {
      best = var;
      arg = k;
    }
  }
  return arg;
}

// Largest one-to-one assignment by trying every detection for every GT.
inline std::size_t exhaustive_matching(const std::vector<std::vector<bool>>& ok) {
  const std::size_t g = ok.size();
  const std::size_t d = g == 0 ? 0 : ok[0].size();
  std::vector<bool> used(d, false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == g) return 0;
    std::size_t best = go(i + 1);  // leave GT i unmatched
    for (std::size_t j = 0; j < d; ++j) {
      if (!used[j] && ok[i][j]) {
        used[j] = true;
        best = std::max(best, 1 + go(i + 1));
        used[j] = false;
      }
    }
    return best;
  };
  return go(0);
}

inline std::vector<bowl::Detection> top_k_of_image(const std::vector<bowl::Detection>& dets, std::uint64_t image,
                                                   std::size_t k) {
  std::vector<bowl::Detection> mine;
  for (const auto& d : dets)
    if (d.image_id == image) mine.push_back(d);
  std::stable_sort(mine.begin(), mine.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  if (mine.size() > k) mine.resize(k);
  return mine;
}

inline std::optional<double> recall(const std::vector<bowl::Detection>& dets, const std::vector<bowl::GtRecord>& gts,
                                    std::size_t k, double thr) {
  if (gts.empty()) return std::nullopt;
  std::vector<std::uint64_t> images;
  for (const auto& g : gts)
    if (std::find(images.begin(), images.end(), g.image_id) == images.end()) images.push_back(g.image_id);
  std::size_t matched = 0;
  for (std::uint64_t id : images) {
    const auto top = top_k_of_image(dets, id, k);
    std::vector<std::vector<bool>> ok;
    for (const auto& g : gts) {
      if (g.image_id != id) continue;
      std::vector<bool> row;
      for (const auto& d : top) row.push_back(bowl::iou(g.gt.box, d.box) >= thr - 1e-12);
      ok.push_back(row);
    }
    matched += exhaustive_matching(ok);
  }
  return double(matched) / double(gts.size());
}

inline std::optional<double> average_recall(const std::vector<bowl::Detection>& dets,
                                            const std::vector<bowl::GtRecord>& gts, std::size_t k) {
  if (gts.empty()) return std::nullopt;
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) sum += *recall(dets, gts, k, 0.5 + 0.05 * i);
  return sum / 10.0;
}

inline std::optional<double> ar_novel(const std::vector<bowl::Detection>& dets,
                                      const std::vector<bowl::GtRecord>& base,
                                      const std::vector<bowl::GtRecord>& novel, std::size_t k) {
  std::vector<bowl::Detection> rest;
  for (const auto& d : dets) {
    bool linked = false;
    for (const auto& b : base) linked = linked || (b.image_id == d.image_id && bowl::iou(b.gt.box, d.box) >= 0.5 - 1e-12);
    if (!linked) rest.push_back(d);
  }
  return average_recall(rest, novel, k);
}

struct ArFixture {
  std::vector<bowl::Detection> dets;
  std::vector<bowl::GtRecord> gts;
};

// Up to 5 images with up to 10 boxes each (GT plus detections), integer
// coordinates in a small canvas so that overlaps are frequent.
inline ArFixture random_ar_fixture(std::mt19937_64& rng) {
  ArFixture f;
  auto rnd = [&](int lo, int hi) { return lo + int(rng() % unsigned(hi - lo + 1)); };
  const int images = rnd(1, 5);
  for (int img = 1; img <= images; ++img) {
    const int n_gt = rnd(0, 4);
    const int n_det = rnd(0, 10 - n_gt);
    std::vector<bowl::Box> gts;
    for (int i = 0; i < n_gt; ++i) {
      const bowl::Box b{double(rnd(0, 20)), double(rnd(0, 20)), double(rnd(4, 16)), double(rnd(4, 16))};
      gts.push_back(b);
      f.gts.push_back({std::uint64_t(img), {b, i, rng() % 2 == 0}});
    }
    for (int i = 0; i < n_det; ++i) {
      bowl::Box b;
      if (!gts.empty() && rng() % 3 != 0) {
        const bowl::Box& g = gts[rng() % gts.size()];
        b = {g.x + rnd(-3, 3), g.y + rnd(-3, 3), std::max(1.0, g.w + rnd(-3, 3)), std::max(1.0, g.h + rnd(-3, 3))};
      } else {
        b = {double(rnd(0, 20)), double(rnd(0, 20)), double(rnd(4, 16)), double(rnd(4, 16))};
      }
      // Coarse scores so ties happen.
      f.dets.push_back({std::uint64_t(img), b, double(rnd(0, 4)) / 4.0});
    }
  }
  return f;
}

inline void split_base_novel(const std::vector<bowl::GtRecord>& gts, std::vector<bowl::GtRecord>& base,
                             std::vector<bowl::GtRecord>& novel) {
  for (const auto& g : gts) (g.gt.is_base ? base : novel).push_back(g);
}

}  // namespace oracle
