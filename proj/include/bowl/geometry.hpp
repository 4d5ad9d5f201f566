#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bowl {

// Axis-aligned box, top-left origin, extents in pixels.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool valid() const { return w > 0.0 && h > 0.0; }
  bool operator==(const Box&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct GtBox {
  Box box;
  int class_id = 0;
  bool is_base = true;
};

struct AnchorConfig {
  std::vector<int> strides{4, 8, 16, 32, 64};
  std::vector<double> scales{32, 64, 128, 256, 512};
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};

  // Throws ConfigError on mismatched lengths or nonpositive entries.
  void validate() const;
};

struct AnchorBox {
  Box box;
  int level = 0;
  Point center;
};

double iou(const Box& a, const Box& b);

// Intersection of `b` with [0, image_w) x [0, image_h); nullopt if empty.
std::optional<Box> clip(const Box& b, double image_w, double image_h);

// One anchor per (level, row, col, ratio) in that order. Level grids span
// ceil(image / stride) cells per axis; anchors are not trimmed at borders.
std::vector<AnchorBox> generate_anchors(int image_w, int image_h, const AnchorConfig& config);

// FCOS centerness of `location` w.r.t. `gt`; 0 unless strictly inside.
double centerness(Point location, const Box& gt);

struct Ltrb {
  double l = 0.0, r = 0.0, t = 0.0, b = 0.0;
  bool operator==(const Ltrb&) const = default;
};

// Distances to the four sides; nullopt when `location` is not strictly inside.
std::optional<Ltrb> ltrb_target(Point location, const Box& gt);

}  // namespace bowl
