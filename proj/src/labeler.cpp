#include "bowl/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bowl/error.hpp"
#include "bowl/similarity.hpp"

namespace bowl {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kPositive: return "positive";
    case Role::kNegative: return "negative";
    case Role::kIgnored: return "ignored";
  }
  return "ignored";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "positive") return Role::kPositive;
  if (text == "negative") return Role::kNegative;
  if (text == "ignored") return Role::kIgnored;
  return std::nullopt;
}

void GammaPolicy::validate() const {
  // Values at or above 1 are legal and mine nothing.
  if (mode == Mode::kFixed && !(std::isfinite(value) && value > -1.0))
    throw ConfigError("fixed gamma must be finite and greater than -1, got " + std::to_string(value));
  if (mode == Mode::kOtsu && bins < 2) throw ConfigError("otsu needs at least 2 bins");
}

// ---------------------------------------------------------------------------
// Pooling

AnchorPooler::AnchorPooler(const PatchGrid& grid)
    : grid_h_(grid.grid_h),
      grid_w_(grid.grid_w),
      dim_(grid.dim),
      half_patch_(grid.patch_size / 2.0),
      stride_(grid.stride),
      patch_(grid.patch_size),
      extent_w_(double(grid.grid_w - 1) * grid.stride + grid.patch_size),
      extent_h_(double(grid.grid_h - 1) * grid.stride + grid.patch_size) {
  const std::size_t w1 = grid_w_ + 1;
  integral_.assign(std::size_t{grid_h_ + 1} * w1 * dim_, 0.0);
  auto at = [&](std::size_t r, std::size_t c) { return integral_.data() + (r * w1 + c) * dim_; };
  for (std::uint32_t r = 0; r < grid_h_; ++r) {
    for (std::uint32_t c = 0; c < grid_w_; ++c) {
      const auto p = grid.patch(r, c);
      double* dst = at(r + 1, c + 1);
      const double* up = at(r, c + 1);
      const double* left = at(r + 1, c);
      const double* diag = at(r, c);
      for (std::uint32_t k = 0; k < dim_; ++k) dst[k] = p[k] + up[k] + left[k] - diag[k];
    }
  }
}

std::optional<AnchorPooler::PatchRange> AnchorPooler::contained(const Box& anchor) const {
  // Patch index i has center i*stride + S/2; keep lo <= center < hi.
  auto first = [&](double lo) { return static_cast<long>(std::ceil((lo - half_patch_) / stride_)); };
  const long c0 = std::max(0L, first(anchor.x));
  const long c1 = std::min<long>(grid_w_, first(anchor.right()));
  const long r0 = std::max(0L, first(anchor.y));
  const long r1 = std::min<long>(grid_h_, first(anchor.bottom()));
  if (c0 >= c1 || r0 >= r1) return std::nullopt;
  return PatchRange{r0, r1, c0, c1};
}

std::optional<AnchorPooler::PatchRange> AnchorPooler::touching(const Box& anchor) const {
  // Patch i spans [i*stride, i*stride + S); overlap needs i*stride < hi and i*stride + S > lo.
  auto first_after = [&](double lo) { return static_cast<long>(std::floor((lo - patch_) / stride_)) + 1; };
  auto end_before = [&](double hi) { return static_cast<long>(std::ceil(hi / stride_)); };
  const long c0 = std::max(0L, first_after(anchor.x));
  const long c1 = std::min<long>(grid_w_, end_before(anchor.right()));
  const long r0 = std::max(0L, first_after(anchor.y));
  const long r1 = std::min<long>(grid_h_, end_before(anchor.bottom()));
  if (c0 >= c1 || r0 >= r1) return std::nullopt;
  return PatchRange{r0, r1, c0, c1};
}

bool AnchorPooler::pool_into(const Box& anchor, std::span<float> out) const {
  const auto range = contained(anchor);
  if (!range) return false;
  const auto [r0, r1, c0, c1] = *range;

  const std::size_t w1 = grid_w_ + 1;
  auto at = [&](long r, long c) { return integral_.data() + (std::size_t(r) * w1 + std::size_t(c)) * dim_; };
  const double* a = at(r1, c1);
  const double* b = at(r0, c1);
  const double* c = at(r1, c0);
  const double* d = at(r0, c0);
  double sq = 0.0;
  std::vector<double> sum(dim_);
  for (std::uint32_t k = 0; k < dim_; ++k) {
    sum[k] = a[k] - b[k] - c[k] + d[k];
    sq += sum[k] * sum[k];
  }
  if (!(sq > 0.0)) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (std::uint32_t k = 0; k < dim_; ++k) out[k] = static_cast<float>(sum[k] * inv);
  return true;
}

std::optional<std::vector<float>> AnchorPooler::pool(const Box& anchor) const {
  std::vector<float> out(dim_);
  if (!pool_into(anchor, out)) return std::nullopt;
  return out;
}

PatchMinTable::PatchMinTable(std::span<const float> values, std::uint32_t grid_h, std::uint32_t grid_w)
    : h_(grid_h), w_(grid_w) {
  if (values.size() != std::size_t{grid_h} * grid_w) throw DimensionError("value count does not match the grid");
  log2_.assign(std::max(grid_h, grid_w) + 1, 0);
  for (std::size_t i = 2; i < log2_.size(); ++i) log2_[i] = log2_[i / 2] + 1;
  const int lh = log2_[grid_h] + 1, lw = log2_[grid_w] + 1;
  levels_.assign(lh, std::vector<std::vector<float>>(lw));
  levels_[0][0].assign(values.begin(), values.end());
  for (int a = 0; a < lh; ++a) {
    for (int b = 0; b < lw; ++b) {
      if (a == 0 && b == 0) continue;
      auto& cur = levels_[a][b];
      cur.assign(std::size_t{grid_h} * grid_w, 0.0f);
      const auto& prev = b > 0 ? levels_[a][b - 1] : levels_[a - 1][b];
      const std::size_t rows = grid_h - (std::size_t{1} << a) + 1, cols = grid_w - (std::size_t{1} << b) + 1;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t other = b > 0 ? r * grid_w + c + (std::size_t{1} << (b - 1))
                                          : (r + (std::size_t{1} << (a - 1))) * grid_w + c;
          cur[r * grid_w + c] = std::min(prev[r * grid_w + c], prev[other]);
        }
    }
  }
}

float PatchMinTable::min(const AnchorPooler::PatchRange& q) const {
  const int a = log2_[q.r1 - q.r0], b = log2_[q.c1 - q.c0];
  const auto& t = levels_[a][b];
  const long r2 = q.r1 - (1L << a), c2 = q.c1 - (1L << b);
  return std::min({t[q.r0 * w_ + q.c0], t[q.r0 * w_ + c2], t[r2 * w_ + q.c0], t[r2 * w_ + c2]});
}

std::optional<std::vector<float>> pool_anchor_embedding(const Box& anchor, const PatchGrid& grid) {
  return AnchorPooler(grid).pool(anchor);
}

// ---------------------------------------------------------------------------
// Otsu

int otsu_bin(std::span<const float> values, int bins) {
  if (bins < 2) throw ConfigError("otsu needs at least 2 bins");
  if (values.size() < 2) throw DegenerateInputError("otsu needs at least two values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DegenerateInputError("otsu over a constant distribution");

  std::vector<std::int64_t> hist(bins, 0);
  const double scale = bins / (hi - lo);
  for (float v : values) {
    const int b = std::min(bins - 1, static_cast<int>((v - lo) * scale));
    ++hist[b];
  }
  // Between-class variance with bin indices as class values, in exact
  // integer arithmetic: sigma_b^2 ∝ (N*S0 - n0*S)^2 / (n0*n1).
  std::int64_t total = 0, weighted = 0;
  for (int b = 0; b < bins; ++b) {
    total += hist[b];
    weighted += hist[b] * b;
  }
  using i128 = __int128;
  // 255^2 * N^6 / 4 < 2^127
  constexpr std::int64_t kExactOtsuLimit = 400000;
  i128 best_num = -1, best_den = 1;
  int best = 1;
  std::int64_t n0 = 0, s0 = 0;
  for (int k = 1; k < bins; ++k) {
    n0 += hist[k - 1];
    s0 += hist[k - 1] * (k - 1);
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 diff = i128(total) * s0 - i128(n0) * weighted;
    const i128 num = diff * diff;
    const i128 den = i128(n0) * n1;
    // num/den > best_num/best_den; the cross products fit in 127 bits while
    // total <= kExactOtsuLimit, beyond that the ratio is compared in long double.
    const bool better = total <= kExactOtsuLimit
                            ? num * best_den > best_num * den
                            : (long double)num / (long double)den > (long double)best_num / (long double)best_den;
    if (best_num < 0 || better) {
      best_num = num;
      best_den = den;
      best = k;
    }
  }
  return best;
}

double otsu_gamma(std::span<const float> values, int bins) {
  const int k = otsu_bin(values, bins);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  return lo + k * (hi - lo) / bins;
}

// ---------------------------------------------------------------------------
// Anchor roles

namespace {

std::optional<Box> matching_box(const AnchorBox& a, const std::optional<std::pair<double, double>>& extent) {
  if (!extent) return a.box;
  return clip(a.box, extent->first, extent->second);
}

}  // namespace

std::vector<AnchorLabel> match_positives(std::span<const AnchorBox> anchors, std::span<const GtBox> gts,
                                         double iou_threshold,
                                         std::optional<std::pair<double, double>> image_extent) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw ConfigError("positive IoU threshold must lie in (0, 1)");
  std::vector<AnchorLabel> labels(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    labels[i].anchor_index = i;
    const auto box = matching_box(anchors[i], image_extent);
    if (!box) continue;
    double best = 0.0;
    std::optional<std::size_t> arg;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gts[g].is_base) continue;
      const double v = iou(*box, gts[g].box);
      if (!arg || v > best) {
        best = v;
        arg = g;
      }
    }
    if (arg && best > iou_threshold) {
      labels[i].role = Role::kPositive;
      labels[i].matched_gt = arg;
    }
  }
  return labels;
}

NegativeMiningResult label_negatives(std::span<const AnchorBox> anchors, std::vector<AnchorLabel> labels,
                                     const PatchGrid& grid, const ExemplarSet& exemplars,
                                     std::span<const GtBox> gts, const NegativeMiningConfig& config) {
  if (exemplars.empty()) throw ConfigError("negative mining needs a nonempty exemplar set");
  if (exemplars.dim() != grid.dim)
    throw DimensionError("grid dim " + std::to_string(grid.dim) + " vs exemplar dim " +
                         std::to_string(exemplars.dim()));
  if (labels.size() != anchors.size()) throw ConsistencyError("labels do not cover the anchor list");
  config.gamma.validate();

  const AnchorPooler pooler(grid);
  const double ext_w = pooler.extent_w(), ext_h = pooler.extent_h();
  auto mined_level = [&](int level) {
    return config.levels.empty() ||
           std::find(config.levels.begin(), config.levels.end(), level) != config.levels.end();
  };

  std::vector<std::size_t> owner;
  std::vector<float> population;
  if (config.similarity == AnchorSimilarity::kPooledMean) {
    VectorMatrix pooled;
    pooled.dim = grid.dim;
    std::vector<float> buf(grid.dim);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      if (!mined_level(anchors[i].level) || !pooler.pool_into(anchors[i].box, buf)) continue;
      pooled.append(buf);
      owner.push_back(i);
    }
    for (const MaxSim& m : max_similarity_batch(pooled, exemplars.embeddings(), config.threads))
      population.push_back(m.similarity);
  } else {
    VectorMatrix patches{grid.dim, grid.data};
    std::vector<float> patch_sim;
    patch_sim.reserve(grid.patch_count());
    for (const MaxSim& m : max_similarity_batch(patches, exemplars.embeddings(), config.threads))
      patch_sim.push_back(m.similarity);
    const PatchMinTable table(patch_sim, grid.grid_h, grid.grid_w);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      if (!mined_level(anchors[i].level)) continue;
      const auto range = pooler.touching(anchors[i].box);
      if (!range) continue;
      owner.push_back(i);
      population.push_back(table.min(*range));
    }
  }
  for (std::size_t j = 0; j < owner.size(); ++j) labels[owner[j]].similarity = population[j];

  NegativeMiningResult result;
  if (config.gamma.mode == GammaPolicy::Mode::kFixed) {
    result.gamma = config.gamma.value;
  } else {
    const auto [lo, hi] = std::minmax_element(population.begin(), population.end());
    if (population.size() >= 2 && *hi > *lo) result.gamma = otsu_gamma(population, config.gamma.bins);
  }

  if (result.gamma) {
    const double gamma = *result.gamma;
    for (std::size_t j = 0; j < owner.size(); ++j) {
      AnchorLabel& label = labels[owner[j]];
      if (label.role == Role::kPositive || !(double(*label.similarity) > gamma)) continue;
      if (config.guard) {
        const auto box = clip(anchors[owner[j]].box, ext_w, ext_h);
        bool overlaps = false;
        for (const GtBox& g : gts)
          if (g.is_base && box && iou(*box, g.box) >= config.guard_iou) overlaps = true;
        if (overlaps) continue;
      }
      label.role = Role::kNegative;
    }
  }
  result.labels = std::move(labels);
  return result;
}

ImageLabeling label_image(const PatchGrid& grid, int image_w, int image_h, std::span<const GtBox> gts,
                          const ExemplarSet& exemplars, const LabelingConfig& config) {
  ImageLabeling out;
  out.anchors = generate_anchors(image_w, image_h, config.anchors);
  auto positives = match_positives(out.anchors, gts, config.iou_positive,
                                   std::make_pair(double(image_w), double(image_h)));
  auto mined = label_negatives(out.anchors, std::move(positives), grid, exemplars, gts, config.mining);
  out.labels = std::move(mined.labels);
  out.gamma = mined.gamma;
  return out;
}

LabelCounts count_roles(std::span<const AnchorLabel> labels) {
  LabelCounts c;
  for (const auto& l : labels) {
    switch (l.role) {
      case Role::kPositive: ++c.positive; break;
      case Role::kNegative: ++c.negative; break;
      case Role::kIgnored: ++c.ignored; break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Self-correlation baseline

std::vector<double> mean_self_similarity(const PatchGrid& grid) {
  const std::size_t m = grid.patch_count();
  if (m < 2) throw DegenerateInputError("self-correlation needs at least two patches");
  std::vector<double> sums(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::span<const float> a(grid.data.data() + i * grid.dim, grid.dim);
    for (std::size_t j = i + 1; j < m; ++j) {
      const double s = dot(a, std::span<const float>(grid.data.data() + j * grid.dim, grid.dim));
      sums[i] += s;
      sums[j] += s;
    }
  }
  for (double& s : sums) s /= double(m - 1);
  return sums;
}

std::vector<bool> self_correlation_labels(const PatchGrid& grid, double quantile) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw ConfigError("quantile must lie in [0, 1]");
  const std::vector<double> means = mean_self_similarity(grid);
  const std::size_t m = means.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  const auto take = static_cast<std::size_t>(std::floor((1.0 - quantile) * double(m) + 1e-9));
  std::vector<bool> mask(m, false);
  for (std::size_t i = 0; i < std::min(take, m); ++i) mask[order[i]] = true;
  return mask;
}

double masked_fraction(const std::vector<bool>& mask, const PatchGrid& grid, const Box& anchor) {
  if (mask.size() != grid.patch_count()) throw DimensionError("mask size does not match the patch grid");
  const int cell = std::gcd(int(grid.stride), int(grid.patch_size));
  const int span = int(grid.patch_size) / cell, step = int(grid.stride) / cell;
  const int nx = int(grid.grid_w - 1) * step + span;
  const int ny = int(grid.grid_h - 1) * step + span;
  std::vector<unsigned char> covered(std::size_t(nx) * ny, 0);
  for (std::uint32_t r = 0; r < grid.grid_h; ++r)
    for (std::uint32_t c = 0; c < grid.grid_w; ++c) {
      if (!mask[r * grid.grid_w + c]) continue;
      for (int y = int(r) * step; y < int(r) * step + span; ++y)
        for (int x = int(c) * step; x < int(c) * step + span; ++x) covered[std::size_t(y) * nx + x] = 1;
    }

  const auto box = clip(anchor, double(nx) * cell, double(ny) * cell);
  if (!box) return 0.0;
  const int x0 = int(std::floor(box->x / cell)), x1 = int(std::ceil(box->right() / cell));
  const int y0 = int(std::floor(box->y / cell)), y1 = int(std::ceil(box->bottom() / cell));
  double area = 0.0;
  for (int y = y0; y < std::min(y1, ny); ++y) {
    const double oy = std::min(box->bottom(), double(y + 1) * cell) - std::max(box->y, double(y) * cell);
    if (oy <= 0) continue;
    for (int x = x0; x < std::min(x1, nx); ++x) {
      if (!covered[std::size_t(y) * nx + x]) continue;
      const double ox = std::min(box->right(), double(x + 1) * cell) - std::max(box->x, double(x) * cell);
      if (ox > 0) area += ox * oy;
    }
  }
  return area / box->area();
}

std::vector<AnchorLabel> mask_to_negative_anchors(const std::vector<bool>& mask, const PatchGrid& grid,
                                                  std::span<const AnchorBox> anchors, double overlap_fraction) {
  std::vector<AnchorLabel> labels(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    labels[i].anchor_index = i;
    if (masked_fraction(mask, grid, anchors[i].box) >= overlap_fraction - 1e-12) labels[i].role = Role::kNegative;
  }
  return labels;
}

}  // namespace bowl
