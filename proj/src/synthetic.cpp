#include "bowl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bowl/error.hpp"

namespace bowl {
namespace {

using Vec = std::vector<double>;

Vec gaussian(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

void unit(Vec& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

// Removes the components along each of `basis` (assumed orthonormal).
void orthogonalize(Vec& v, const std::vector<Vec>& basis) {
  for (const Vec& b : basis) {
    double p = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) p += v[i] * b[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
  }
  unit(v);
}

std::vector<float> to_float(const Vec& v) { return {v.begin(), v.end()}; }

}  // namespace

void SyntheticConfig::validate() const {
  if (images < 1 || image_size < int(patch_size) || dim < 1 || patch_size < 1 || stride < 1)
    throw ConfigError("synthetic sizes must be positive and the image at least one patch wide");
  if (textures < 1 || int(dim) < 2 * textures + 2) throw ConfigError("synthetic dim must be at least 2 * textures + 2");
  if (min_objects < 0 || max_objects < min_objects) throw ConfigError("bad synthetic object count range");
  if (min_object_size < 1 || max_object_size < min_object_size || max_object_size > image_size)
    throw ConfigError("bad synthetic object size range");
  if (base_classes < 1 || novel_classes < 1) throw ConfigError("synthetic data needs base and novel classes");
  if (!(noise >= 0.0) || !(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("synthetic noise must be >= 0 and train_fraction in (0, 1)");
}

const PatchGrid& SyntheticDataset::grid(std::uint64_t image_id) const {
  for (const auto& g : grids)
    if (g.image_id == image_id) return g;
  throw IndexError("no synthetic image " + std::to_string(image_id));
}

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  // Orthonormal latent frame: objectness, one per texture, then one salient
  // direction per texture.
  std::vector<Vec> frame;
  for (int i = 0; i < 2 * cfg.textures + 1; ++i) {
    Vec v = gaussian(rng, cfg.dim);
    orthogonalize(v, frame);
    frame.push_back(v);
  }
  const Vec& objectness = frame[0];
  auto salient = [&](int t) -> const Vec& { return frame[1 + cfg.textures + t]; };
  std::vector<Vec> textures;
  for (int t = 0; t < cfg.textures; ++t) {
    Vec v = frame[1 + t];
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += cfg.texture_salient_weight * salient(t)[k];
    unit(v);
    textures.push_back(v);
  }
  SyntheticDataset ds;
  ds.object_direction = to_float(objectness);
  for (int t = 0; t < cfg.textures; ++t) ds.salient_directions.push_back(to_float(salient(t)));
  for (const Vec& t : textures) ds.texture_directions.push_back(to_float(t));

  for (int c = 0; c < cfg.base_classes + cfg.novel_classes; ++c)
    ds.annotations.categories.push_back(
        {c + 1, (c < cfg.base_classes ? "base_" : "novel_") + std::to_string(c + 1), c < cfg.base_classes});

  const std::uint32_t cells = (cfg.image_size - cfg.patch_size) / cfg.stride + 1;
  const int train_images = std::max(1, int(std::lround(cfg.train_fraction * cfg.images)));
  const double noise_scale = cfg.noise / std::sqrt(double(cfg.dim));

  for (int i = 0; i < cfg.images; ++i) {
    const std::uint64_t id = std::uint64_t(i) + 1;
    ds.annotations.images.push_back({id, cfg.image_size, cfg.image_size});
    (i < train_images ? ds.train_ids : ds.eval_ids).push_back(id);

    // Background: one texture, or two split at a stride-aligned column.
    const int tex_a = uniform_int(0, cfg.textures - 1);
    int tex_b = tex_a;
    int split = cfg.image_size;
    if (cfg.textures > 1 && uni(rng) < 0.5) {
      tex_b = (tex_a + uniform_int(1, cfg.textures - 1)) % cfg.textures;
      split = int(cfg.stride) * uniform_int(2, int(cells) - 2);
    }

    struct Placed {
      Box box;
      int cls;
      bool base;
    };
    std::vector<Placed> objects;
    const int count = uniform_int(cfg.min_objects, cfg.max_objects);
    for (int o = 0, tries = 0; o < count && tries < 200; ++tries) {
      const int w = uniform_int(cfg.min_object_size, cfg.max_object_size);
      const int h = uniform_int(cfg.min_object_size, cfg.max_object_size);
      const Box b{double(uniform_int(0, cfg.image_size - w)), double(uniform_int(0, cfg.image_size - h)), double(w),
                  double(h)};
      const bool clash = std::any_of(objects.begin(), objects.end(), [&](const Placed& p) {
        return b.x < p.box.right() + cfg.stride && p.box.x < b.right() + cfg.stride &&
               b.y < p.box.bottom() + cfg.stride && p.box.y < b.bottom() + cfg.stride;
      });
      if (clash) continue;
      const bool novel = uni(rng) < cfg.novel_fraction;
      const int cls = novel ? cfg.base_classes + uniform_int(1, cfg.novel_classes) : uniform_int(1, cfg.base_classes);
      objects.push_back({b, cls, !novel});
      ds.annotations.annotations.push_back({id, GtBox{b, cls, !novel}});
      ++o;
    }

    PatchGrid g;
    g.image_id = id;
    g.grid_h = g.grid_w = cells;
    g.patch_size = cfg.patch_size;
    g.stride = cfg.stride;
    g.dim = cfg.dim;
    g.data.resize(std::size_t(cells) * cells * cfg.dim);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::uint32_t r = 0; r < cells; ++r) {
      for (std::uint32_t c = 0; c < cells; ++c) {
        const Point center{c * double(cfg.stride) + cfg.patch_size / 2.0, r * double(cfg.stride) + cfg.patch_size / 2.0};
        const Vec* base = &textures[center.x < split ? tex_a : tex_b];
        Vec part;
        for (const Placed& p : objects) {
          if (center.x >= p.box.x && center.x < p.box.right() && center.y >= p.box.y && center.y < p.box.bottom()) {
            part = gaussian(rng, cfg.dim);
            orthogonalize(part, frame);
            // Base class c shares the salient direction of texture c mod T.
            const double salience = p.base ? cfg.base_salient_weight : 0.0;
            const Vec& s = salient((p.cls - 1) % cfg.textures);
            for (std::size_t k = 0; k < part.size(); ++k)
              part[k] += cfg.object_weight * objectness[k] + salience * s[k];
            unit(part);
            base = &part;
          }
        }
        // Stored unnormalized: random positive scale on top of the noisy direction.
        const double scale = 0.5 + 1.5 * uni(rng);
        auto out = g.patch(r, c);
        for (std::uint32_t k = 0; k < cfg.dim; ++k) {
          const double jitter = cfg.noise > 0.0 ? noise_scale * n01(rng) : 0.0;
          out[k] = static_cast<float>(scale * ((*base)[k] + jitter));
        }
      }
    }
    ds.grids.push_back(std::move(g));
  }
  return ds;
}

}  // namespace bowl
