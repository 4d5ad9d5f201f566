#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bowl/codebook.hpp"
#include "bowl/embedding_store.hpp"
#include "bowl/geometry.hpp"

namespace bowl {

enum class Role { kPositive, kNegative, kIgnored };

std::string_view to_string(Role role);
// Accepts "positive", "negative", "ignored"; nullopt otherwise.
std::optional<Role> parse_role(std::string_view text);

struct AnchorLabel {
  std::size_t anchor_index = 0;
  Role role = Role::kIgnored;
  std::optional<std::size_t> matched_gt;
  // Max exemplar similarity of the pooled anchor embedding, when computable.
  std::optional<float> similarity;
};

struct GammaPolicy {
  enum class Mode { kFixed, kOtsu };
  Mode mode = Mode::kOtsu;
  double value = 0.0;  // kFixed only
  int bins = 256;      // kOtsu only

  static GammaPolicy fixed(double v) { return {Mode::kFixed, v, 256}; }
  static GammaPolicy otsu(int bins = 256) { return {Mode::kOtsu, 0.0, bins}; }
  void validate() const;
};

inline constexpr double kDefaultPositiveIou = 0.3;
inline constexpr double kNegativeGuardIou = 0.1;

// Mean-pools a normalized grid over anchor rectangles. A patch belongs to an
// anchor when its center lies in [x, x+w) x [y, y+h).
class AnchorPooler {
 public:
  // `grid` must already be normalized.
  explicit AnchorPooler(const PatchGrid& grid);

  std::uint32_t dim() const { return dim_; }
  double extent_w() const { return extent_w_; }
  double extent_h() const { return extent_h_; }

  // Re-normalized mean of contained patches, or nullopt if none.
  std::optional<std::vector<float>> pool(const Box& anchor) const;
  bool pool_into(const Box& anchor, std::span<float> out) const;

  struct PatchRange {
    long r0, r1, c0, c1;  // half-open
  };
  // Patches whose center lies in the anchor; nullopt when there are none.
  std::optional<PatchRange> contained(const Box& anchor) const;
  // Patches whose rectangle overlaps the anchor with positive area.
  std::optional<PatchRange> touching(const Box& anchor) const;

 private:
  std::uint32_t grid_h_, grid_w_, dim_;
  double half_patch_, stride_, patch_;
  double extent_w_, extent_h_;
  std::vector<double> integral_;  // (grid_h+1) x (grid_w+1) x dim
};

// Range-minimum over a grid of per-patch values (sparse table, O(1) query).
class PatchMinTable {
 public:
  PatchMinTable(std::span<const float> values, std::uint32_t grid_h, std::uint32_t grid_w);
  float min(const AnchorPooler::PatchRange& range) const;

 private:
  std::uint32_t h_, w_;
  std::vector<int> log2_;
  // levels_[a][b] holds minima over 2^a rows x 2^b cols blocks.
  std::vector<std::vector<std::vector<float>>> levels_;
};

// Convenience wrapper over AnchorPooler; `grid` must be normalized.
std::optional<std::vector<float>> pool_anchor_embedding(const Box& anchor, const PatchGrid& grid);

// Histogram Otsu over [min, max] with `bins` equal-width bins. Returns the
// bin edge maximizing between-class variance, lowest edge on ties. Throws
// DegenerateInputError when fewer than two distinct values are present.
double otsu_gamma(std::span<const float> similarities, int bins = 256);
// Index k in [1, bins) of the winning edge min + k (max - min) / bins.
int otsu_bin(std::span<const float> similarities, int bins = 256);

// Positive iff max IoU over base-class GT exceeds `iou_threshold`. Anchors are
// clipped to `image_extent` (w, h) before matching when given.
std::vector<AnchorLabel> match_positives(std::span<const AnchorBox> anchors, std::span<const GtBox> gts,
                                         double iou_threshold,
                                         std::optional<std::pair<double, double>> image_extent = std::nullopt);

// How an anchor's exemplar similarity is derived from its patches.
enum class AnchorSimilarity {
  // Smallest per-patch s_max among the patches overlapping the anchor: the
  // anchor is background only if every patch touching it is.
  kWeakestPatch,
  // s_max of the re-normalized mean of the contained patch embeddings.
  kPooledMean,
};

struct NegativeMiningConfig {
  AnchorSimilarity similarity = AnchorSimilarity::kWeakestPatch;
  GammaPolicy gamma = GammaPolicy::otsu();
  double guard_iou = kNegativeGuardIou;
  bool guard = true;
  // Empty means every level is mined.
  std::vector<int> levels;
  unsigned threads = 1;
};

struct NegativeMiningResult {
  std::vector<AnchorLabel> labels;
  // nullopt when Otsu had no usable population (then no negatives are mined).
  std::optional<double> gamma;
};

// Fills in similarities and negative roles on top of `labels` (as returned by
// match_positives). `grid` must be normalized; `exemplars` nonempty.
NegativeMiningResult label_negatives(std::span<const AnchorBox> anchors, std::vector<AnchorLabel> labels,
                                     const PatchGrid& grid, const ExemplarSet& exemplars,
                                     std::span<const GtBox> gts, const NegativeMiningConfig& config);

struct LabelingConfig {
  AnchorConfig anchors;
  double iou_positive = kDefaultPositiveIou;
  NegativeMiningConfig mining;
};

struct ImageLabeling {
  std::vector<AnchorBox> anchors;
  std::vector<AnchorLabel> labels;
  std::optional<double> gamma;
};

// Full per-image pass: anchors over image_w x image_h, positives from base GT,
// negatives from the exemplar set. `grid` must be normalized.
ImageLabeling label_image(const PatchGrid& grid, int image_w, int image_h, std::span<const GtBox> gts,
                          const ExemplarSet& exemplars, const LabelingConfig& config);

struct LabelCounts {
  std::size_t positive = 0, negative = 0, ignored = 0;
};
LabelCounts count_roles(std::span<const AnchorLabel> labels);

// Self-correlation baseline: mean cosine similarity of each patch to every
// other patch; the top (1 - quantile) share (ties by lower index) is marked
// background. `grid` must be normalized.
std::vector<double> mean_self_similarity(const PatchGrid& grid);
std::vector<bool> self_correlation_labels(const PatchGrid& grid, double quantile);

// Negative iff at least `overlap_fraction` of the anchor's in-image area is
// covered by the union of background-masked patch rectangles.
std::vector<AnchorLabel> mask_to_negative_anchors(const std::vector<bool>& mask, const PatchGrid& grid,
                                                  std::span<const AnchorBox> anchors,
                                                  double overlap_fraction = 0.9);
// Fraction of `anchor` (clipped to the grid extent) covered by the mask.
double masked_fraction(const std::vector<bool>& mask, const PatchGrid& grid, const Box& anchor);

}  // namespace bowl
