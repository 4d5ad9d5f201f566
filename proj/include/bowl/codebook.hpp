#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bowl/embedding_store.hpp"
#include "bowl/similarity.hpp"

namespace bowl {

inline constexpr float kDefaultLambda = 0.2f;
inline constexpr std::size_t kDefaultTopN = 1000;

struct Provenance {
  std::uint64_t image_id = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  bool operator==(const Provenance&) const = default;
};

struct ExemplarInfo {
  std::uint64_t count = 0;
  Provenance provenance;
  std::uint64_t insertion_index = 0;
  bool operator==(const ExemplarInfo&) const = default;
};

// Non-object exemplar codebook. Embeddings live in one contiguous matrix so
// similarity scans stream through memory; per-exemplar bookkeeping sits in a
// parallel array.
class ExemplarSet {
 public:
  ExemplarSet() = default;
  ExemplarSet(std::uint32_t dim, float lambda);

  std::uint32_t dim() const { return embeddings_.dim; }
  float lambda() const { return lambda_; }
  std::size_t size() const { return info_.size(); }
  bool empty() const { return info_.empty(); }

  std::span<const float> embedding(std::size_t i) const { return embeddings_.row(i); }
  const ExemplarInfo& info(std::size_t i) const { return info_[i]; }
  const VectorMatrix& embeddings() const { return embeddings_; }
  std::uint64_t total_count() const;

  // Appends an exemplar. `unit_embedding` must already be normalized.
  void push_back(std::span<const float> unit_embedding, const ExemplarInfo& info);

  bool operator==(const ExemplarSet&) const;

 private:
  friend class CodebookBuilder;
  VectorMatrix embeddings_;
  std::vector<ExemplarInfo> info_;
  float lambda_ = kDefaultLambda;
};

// Max cosine similarity of a unit query to the set, or kNoSimilarity when the
// set is empty. Throws DimensionError on dim mismatch.
float s_max(std::span<const float> unit_query, const ExemplarSet& set);
MaxSim nearest_exemplar(std::span<const float> unit_query, const ExemplarSet& set);

// Greedy streaming construction: each patch either founds a new exemplar
// (s_max < lambda) or increments the count of its most similar exemplar.
class CodebookBuilder {
 public:
  CodebookBuilder(std::uint32_t dim, float lambda);

  void add(std::span<const float> unit_embedding, const Provenance& provenance);
  // Normalizes each patch of `grid` and feeds it in row-major order.
  void add_grid(const PatchGrid& grid);

  std::uint64_t patches_seen() const { return seen_; }
  const ExemplarSet& current() const { return set_; }
  ExemplarSet finish() &&;

 private:
  ExemplarSet set_;
  std::uint64_t seen_ = 0;
  std::vector<float> scratch_;
};

ExemplarSet build_exemplars(std::span<const PatchGrid> stream, float lambda);

// The n most frequent exemplars in descending count, ties to the earlier
// insertion. Throws ConfigError when n == 0.
ExemplarSet top_n(const ExemplarSet& set, std::size_t n);

inline constexpr char kExemplarMagic[4] = {'B', 'W', 'L', 'X'};
inline constexpr std::uint32_t kExemplarVersion = 1;

void save_exemplars(const ExemplarSet& set, const std::filesystem::path& path);
ExemplarSet load_exemplars(const std::filesystem::path& path);

}  // namespace bowl
