#include "bowl/evalkit.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "bowl/error.hpp"

namespace bowl {
namespace {

struct ImageSlice {
  std::vector<const Detection*> dets;  // score descending, stable
  std::vector<const GtRecord*> gts;
};

std::map<std::uint64_t, ImageSlice> group(std::span<const Detection> dets, std::span<const GtRecord> gts) {
  std::map<std::uint64_t, ImageSlice> images;
  for (const auto& d : dets) images[d.image_id].dets.push_back(&d);
  for (const auto& g : gts) images[g.image_id].gts.push_back(&g);
  for (auto& [id, img] : images)
    std::stable_sort(img.dets.begin(), img.dets.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });
  return images;
}

// Greedy pass (each GT in order takes the highest-scoring free detection)
// followed by augmenting paths, giving a maximum-cardinality matching.
std::size_t match_count(const std::vector<const Detection*>& dets, std::size_t k,
                        const std::vector<const GtRecord*>& gts, double threshold) {
  const std::size_t nd = std::min(k, dets.size());
  std::vector<std::vector<std::size_t>> adj(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    for (std::size_t d = 0; d < nd; ++d)
      if (iou(gts[g]->gt.box, dets[d]->box) >= threshold - kIouSlack) adj[g].push_back(d);

  std::vector<long> det_owner(nd, -1);
  std::vector<long> gt_match(gts.size(), -1);
  for (std::size_t g = 0; g < gts.size(); ++g)
    for (std::size_t d : adj[g])
      if (det_owner[d] < 0) {
        det_owner[d] = long(g);
        gt_match[g] = long(d);
        break;
      }

  std::vector<char> visited;
  auto augment = [&](auto&& self, std::size_t g) -> bool {
    for (std::size_t d : adj[g]) {
      if (visited[d]) continue;
      visited[d] = 1;
      if (det_owner[d] < 0 || self(self, std::size_t(det_owner[d]))) {
        det_owner[d] = long(g);
        gt_match[g] = long(d);
        return true;
      }
    }
    return false;
  };
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_match[g] >= 0) continue;
    visited.assign(nd, 0);
    augment(augment, g);
  }
  return std::size_t(std::count_if(gt_match.begin(), gt_match.end(), [](long m) { return m >= 0; }));
}

std::vector<double> curve(const std::map<std::uint64_t, ImageSlice>& images, std::size_t k,
                          std::span<const double> thresholds) {
  std::size_t total = 0;
  for (const auto& [id, img] : images) total += img.gts.size();
  std::vector<double> out;
  if (total == 0) return out;
  for (double t : thresholds) {
    std::size_t matched = 0;
    for (const auto& [id, img] : images) matched += match_count(img.dets, k, img.gts, t);
    out.push_back(double(matched) / double(total));
  }
  return out;
}

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

void check_budget(std::size_t k) {
  if (k < 1) throw ConfigError("detection budget k must be >= 1");
}

}  // namespace

std::optional<double> recall_at(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k,
                                double iou_threshold) {
  check_budget(k);
  const double t[1] = {iou_threshold};
  const auto c = curve(group(dets, gts), k, t);
  if (c.empty()) return std::nullopt;
  return c.front();
}

std::vector<double> recall_curve(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k) {
  check_budget(k);
  return curve(group(dets, gts), k, kArThresholds);
}

std::optional<double> average_recall(std::span<const Detection> dets, std::span<const GtRecord> gts,
                                     std::size_t k) {
  return mean(recall_curve(dets, gts, k));
}

std::vector<Detection> remove_base_linked(std::span<const Detection> dets, std::span<const GtRecord> gts_base) {
  std::map<std::uint64_t, std::vector<const GtRecord*>> base;
  for (const auto& g : gts_base) base[g.image_id].push_back(&g);
  std::vector<Detection> out;
  for (const auto& d : dets) {
    bool linked = false;
    if (const auto it = base.find(d.image_id); it != base.end())
      for (const GtRecord* g : it->second)
        if (iou(d.box, g->gt.box) >= kBaseLinkIou - kIouSlack) linked = true;
    if (!linked) out.push_back(d);
  }
  return out;
}

std::optional<double> ar_novel(std::span<const Detection> dets, std::span<const GtRecord> gts_base,
                               std::span<const GtRecord> gts_novel, std::size_t k) {
  check_budget(k);
  const auto rest = remove_base_linked(dets, gts_base);
  return average_recall(rest, gts_novel, k);
}

ScaleAr ar_by_scale(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k) {
  std::vector<GtRecord> small, medium, large;
  for (const auto& g : gts) {
    const double a = g.gt.box.area();
    (a < kSmallArea ? small : a < kLargeArea ? medium : large).push_back(g);
  }
  return {average_recall(dets, small, k), average_recall(dets, medium, k), average_recall(dets, large, k)};
}

std::optional<double> negative_precision(std::span<const NegativeAnchor> negatives, std::span<const GtRecord> gts,
                                         double iou_threshold, std::optional<double> anchor_size) {
  std::map<std::uint64_t, std::vector<const GtRecord*>> by_image;
  for (const auto& g : gts) by_image[g.image_id].push_back(&g);
  std::size_t considered = 0, clean = 0;
  for (const auto& n : negatives) {
    if (anchor_size && (std::abs(n.box.w - *anchor_size) > 1e-6 || std::abs(n.box.h - *anchor_size) > 1e-6))
      continue;
    ++considered;
    bool hit = false;
    if (const auto it = by_image.find(n.image_id); it != by_image.end())
      for (const GtRecord* g : it->second)
        if (iou(n.box, g->gt.box) >= iou_threshold) hit = true;
    if (!hit) ++clean;
  }
  if (considered == 0) return std::nullopt;
  return double(clean) / double(considered);
}

ArReport evaluate(std::span<const Detection> dets, std::span<const GtRecord> gts, std::size_t k) {
  check_budget(k);
  ArReport r;
  r.budget = k;
  r.detections = dets.size();
  std::vector<GtRecord> base, novel;
  std::map<std::uint64_t, int> images;
  for (const auto& g : gts) {
    (g.gt.is_base ? base : novel).push_back(g);
    images[g.image_id] = 1;
  }
  for (const auto& d : dets) images[d.image_id] = 1;
  r.images = images.size();
  r.gt_base = base.size();
  r.gt_novel = novel.size();
  r.recall_per_threshold = recall_curve(dets, gts, k);
  r.ar_all = mean(r.recall_per_threshold);
  const auto scale = ar_by_scale(dets, gts, k);
  r.ar_small = scale.small;
  r.ar_medium = scale.medium;
  r.ar_large = scale.large;
  const auto rest = remove_base_linked(dets, base);
  r.ar_novel = average_recall(rest, novel, k);
  const auto novel_scale = ar_by_scale(rest, novel, k);
  r.ar_novel_small = novel_scale.small;
  r.ar_novel_medium = novel_scale.medium;
  r.ar_novel_large = novel_scale.large;
  return r;
}

}  // namespace bowl
