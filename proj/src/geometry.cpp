#include "bowl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bowl/error.hpp"

namespace bowl {

void AnchorConfig::validate() const {
  if (strides.empty() || strides.size() != scales.size())
    throw ConfigError("anchor strides and scales must be nonempty and of equal length");
  if (aspect_ratios.empty()) throw ConfigError("anchor aspect ratios must be nonempty");
  for (int s : strides)
    if (s <= 0) throw ConfigError("anchor strides must be positive");
  for (double s : scales)
    if (!(s > 0.0)) throw ConfigError("anchor scales must be positive");
  for (double r : aspect_ratios)
    if (!(r > 0.0)) throw ConfigError("anchor aspect ratios must be positive");
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::optional<Box> clip(const Box& b, double image_w, double image_h) {
  const double x0 = std::clamp(b.x, 0.0, image_w), x1 = std::clamp(b.right(), 0.0, image_w);
  const double y0 = std::clamp(b.y, 0.0, image_h), y1 = std::clamp(b.bottom(), 0.0, image_h);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

std::vector<AnchorBox> generate_anchors(int image_w, int image_h, const AnchorConfig& config) {
  config.validate();
  const int min_stride = *std::min_element(config.strides.begin(), config.strides.end());
  if (image_w < min_stride || image_h < min_stride)
    throw ConfigError("image " + std::to_string(image_w) + "x" + std::to_string(image_h) +
                      " is smaller than the finest anchor stride " + std::to_string(min_stride));
  std::vector<AnchorBox> anchors;
  for (std::size_t level = 0; level < config.strides.size(); ++level) {
    const int stride = config.strides[level];
    const double scale = config.scales[level];
    const int rows = (image_h + stride - 1) / stride;
    const int cols = (image_w + stride - 1) / stride;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const Point center{c * stride + stride / 2.0, r * stride + stride / 2.0};
        for (double ratio : config.aspect_ratios) {
          const double w = scale * std::sqrt(ratio);
          const double h = scale / std::sqrt(ratio);
          anchors.push_back({Box{center.x - w / 2, center.y - h / 2, w, h}, static_cast<int>(level), center});
        }
      }
    }
  }
  return anchors;
}

std::optional<Ltrb> ltrb_target(Point p, const Box& gt) {
  const Ltrb d{p.x - gt.x, gt.right() - p.x, p.y - gt.y, gt.bottom() - p.y};
  if (d.l <= 0.0 || d.r <= 0.0 || d.t <= 0.0 || d.b <= 0.0) return std::nullopt;
  return d;
}

double centerness(Point location, const Box& gt) {
  const auto d = ltrb_target(location, gt);
  if (!d) return 0.0;
  const double horizontal = std::min(d->l, d->r) / std::max(d->l, d->r);
  const double vertical = std::min(d->t, d->b) / std::max(d->t, d->b);
  return std::sqrt(horizontal * vertical);
}

}  // namespace bowl
