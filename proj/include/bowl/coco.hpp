#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bowl/evalkit.hpp"

namespace bowl {

struct CocoImage {
  std::uint64_t id = 0;
  int width = 0;
  int height = 0;
};

struct CocoCategory {
  int id = 0;
  std::string name;
  bool is_base = true;  // "split": "base" | "novel"; base when absent
};

// COCO-style ground truth. Base/novel membership comes from each category's
// "split" field and is copied onto every GtRecord.
struct CocoDataset {
  std::vector<CocoImage> images;
  std::vector<CocoCategory> categories;
  std::vector<GtRecord> annotations;

  const CocoImage* find_image(std::uint64_t id) const;
  std::vector<GtRecord> annotations_for(std::uint64_t image_id) const;
};

CocoDataset read_coco(const std::filesystem::path& path);
void write_coco(const CocoDataset& dataset, const std::filesystem::path& path);

// Detections as a COCO results array ([{image_id, bbox, score, ...}]) or an
// object with an "annotations" array.
std::vector<Detection> read_detections(const std::filesystem::path& path);
void write_detections(std::span<const Detection> dets, const std::filesystem::path& path);

}  // namespace bowl
