#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bowl/geometry.hpp"
#include "bowl/labeler.hpp"

namespace bowl {

struct TargetRecord {
  std::uint64_t image_id = 0;
  std::uint64_t anchor_index = 0;
  Role role = Role::kPositive;  // kPositive or kNegative
  std::optional<Ltrb> regression;
  double objectness = 0.0;
  bool operator==(const TargetRecord&) const = default;
};

struct PredictionRecord {
  std::uint64_t image_id = 0;
  std::uint64_t anchor_index = 0;
  double objectness_logit = 0.0;
  std::optional<Ltrb> regression;
};

struct AssignStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  // Positives whose anchor center falls outside the matched box; they have no
  // regression target and are dropped.
  std::size_t dropped_positives = 0;
};

// One record per positive and negative label, in anchor order. Throws
// ConsistencyError for a positive label without a valid matched GT. Counts
// are added to `*stats`.
std::vector<TargetRecord> assign_targets(std::uint64_t image_id, std::span<const AnchorLabel> labels,
                                         std::span<const AnchorBox> anchors, std::span<const GtBox> gts,
                                         AssignStats* stats = nullptr);

// Keeps at most `cap` records per (image, role), chosen uniformly with `seed`;
// survivors stay in their original order.
std::vector<TargetRecord> cap_per_role(std::span<const TargetRecord> records, std::size_t cap, std::uint64_t seed);

double sigmoid(double z);

// Dense core of the objectness term: mean |sigmoid(logits[i]) - targets[i]|.
// When `grad` is nonempty it receives d loss / d logits[i].
double objectness_loss_dense(std::span<const double> logits, std::span<const double> targets,
                             std::span<double> grad = {});

// (1 / (|A_K| + |A_B|)) * sum |sigmoid(logit) - o*| over every target.
// Throws CoverageError when a target has no prediction.
double objectness_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets);

// d objectness_loss / d logit for each entry of `preds` (zero for predictions
// without a target). Uses the zero subgradient where sigmoid(logit) == o*.
std::vector<double> objectness_loss_gradient(std::span<const PredictionRecord> preds,
                                             std::span<const TargetRecord> targets);

// (1 / |A_K|) * sum over positives of the mean |pred - target| over (l, r, t, b).
// Throws ConsistencyError if a negative target is passed.
double regression_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets);

struct LossBreakdown {
  double total = 0.0;
  double regression = 0.0;
  double objectness = 0.0;
};

// Positives regress, positives and negatives share the objectness term.
LossBreakdown bowl_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets);
// Negatives are ignored entirely.
LossBreakdown oln_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets);
// Closed-world reference: binary cross-entropy over every record (positive
// class 1, negative class 0) plus the positive regression term.
LossBreakdown closed_world_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets);

void write_targets(std::span<const TargetRecord> records, const std::filesystem::path& path);
// Throws ParseError naming the 1-based line of the first malformed record.
std::vector<TargetRecord> read_targets(const std::filesystem::path& path);

}  // namespace bowl
