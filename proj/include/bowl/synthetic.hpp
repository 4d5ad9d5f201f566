#pragma once

#include <cstdint>
#include <vector>

#include "bowl/coco.hpp"
#include "bowl/embedding_store.hpp"

namespace bowl {

// Planted scenes: each image is one or two background textures (shared across
// the whole dataset) with a few objects on top. Every object patch mixes a
// shared "objectness" direction with an instance-specific one, so objects are
// rare and mutually dissimilar while textures repeat everywhere. Each texture
// leans toward its own salient direction, and base objects of the matching
// class share it, so a scorer trained on positives alone also rates textures.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  int images = 24;
  int image_size = 128;
  std::uint32_t dim = 128;
  std::uint32_t patch_size = 16;
  std::uint32_t stride = 8;
  double noise = 0.05;
  int textures = 4;
  int min_objects = 2;
  int max_objects = 4;
  int min_object_size = 24;
  int max_object_size = 64;
  int base_classes = 4;
  int novel_classes = 4;
  double novel_fraction = 0.5;
  double train_fraction = 0.5;
  // Weights against the unit part / texture direction.
  double object_weight = 0.25;
  double base_salient_weight = 0.25;
  double texture_salient_weight = 0.5;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<PatchGrid> grids;  // raw (unnormalized) embeddings, one per image
  CocoDataset annotations;
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> eval_ids;
  // Latent unit directions used by the generator.
  std::vector<std::vector<float>> texture_directions;
  std::vector<float> object_direction;
  // One per texture; base class c also carries direction c mod textures.
  std::vector<std::vector<float>> salient_directions;

  const PatchGrid& grid(std::uint64_t image_id) const;
};

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config);

}  // namespace bowl
