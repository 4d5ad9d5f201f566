#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bowl/labeler.hpp"

namespace bowl {

// One line of the label table written by label-anchors.
struct LabelRow {
  std::uint64_t image_id = 0;
  int level = 0;
  AnchorLabel label;
  bool operator==(const LabelRow& o) const {
    return image_id == o.image_id && level == o.level && label.anchor_index == o.label.anchor_index &&
           label.role == o.label.role && label.matched_gt == o.label.matched_gt &&
           label.similarity == o.label.similarity;
  }
};

// Tab-separated: image_id, anchor_index, level, role, matched_gt, s_max.
// Missing values are written as "-". The first line is a header.
void write_label_table(std::span<const LabelRow> rows, const std::filesystem::path& path);
// Throws ParseError naming the 1-based line of the first malformed row.
std::vector<LabelRow> read_label_table(const std::filesystem::path& path);

}  // namespace bowl
