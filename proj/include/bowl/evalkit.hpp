#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bowl/geometry.hpp"

namespace bowl {

struct Detection {
  std::uint64_t image_id = 0;
  Box box;
  double score = 0.0;
};

struct GtRecord {
  std::uint64_t image_id = 0;
  GtBox gt;
};

inline constexpr std::size_t kDefaultBudget = 100;
inline constexpr std::array<double, 10> kArThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                         0.75, 0.80, 0.85, 0.90, 0.95};
// Slack for IoU values that land on a threshold up to rounding.
inline constexpr double kIouSlack = 1e-12;
inline constexpr double kBaseLinkIou = 0.5;
inline constexpr double kSmallArea = 32.0 * 32.0;
inline constexpr double kLargeArea = 96.0 * 96.0;

// Recall of `gts` by the top-k detections of each image (score descending,
// ties by input order) at one IoU threshold (inclusive). Each detection
// covers at most one GT and the matched count is the largest achievable
// one-to-one assignment. nullopt when `gts` is empty.
std::optional<double> recall_at(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k,
                                double iou_threshold);

// Per-threshold recall over kArThresholds; empty when `gts` is empty.
std::vector<double> recall_curve(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k);

// Mean of recall_at over IoU 0.50:0.05:0.95.
std::optional<double> average_recall(std::span<const Detection> dets, std::span<const GtRecord> gts,
                                     std::size_t k);

// Detections left after removing those linked to base GT, i.e. with
// IoU >= 0.5 against some base GT box of the same image. Order is preserved.
std::vector<Detection> remove_base_linked(std::span<const Detection> dets, std::span<const GtRecord> gts_base);

// Novel-class AR: base-linked detections leave the budget before the top-k cut.
std::optional<double> ar_novel(std::span<const Detection> dets, std::span<const GtRecord> gts_base,
                               std::span<const GtRecord> gts_novel, std::size_t k);

struct ScaleAr {
  std::optional<double> small, medium, large;
};

ScaleAr ar_by_scale(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k);

struct NegativeAnchor {
  std::uint64_t image_id = 0;
  Box box;
};

// Share of negatives whose IoU with every GT of the same image is below
// `iou_threshold`. With `anchor_size`, only w == h == size anchors count.
// nullopt when no negative survives the filter.
std::optional<double> negative_precision(std::span<const NegativeAnchor> negatives, std::span<const GtRecord> gts,
                                         double iou_threshold, std::optional<double> anchor_size = std::nullopt);

struct ArReport {
  std::size_t budget = kDefaultBudget;
  std::optional<double> ar_all;
  std::optional<double> ar_novel;
  std::optional<double> ar_small, ar_medium, ar_large;
  // Novel-class protocol with base-linked detections removed.
  std::optional<double> ar_novel_small, ar_novel_medium, ar_novel_large;
  std::vector<double> recall_per_threshold;  // all GT
  std::size_t images = 0, gt_base = 0, gt_novel = 0, detections = 0;
};

ArReport evaluate(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k);

}  // namespace bowl
