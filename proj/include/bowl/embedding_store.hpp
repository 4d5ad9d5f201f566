#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

namespace bowl {

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const PixelRect&) const = default;
};

// One image's grid of patch embeddings, row-major, `dim` floats per patch.
struct PatchGrid {
  std::uint64_t image_id = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::uint32_t patch_size = 0;
  std::uint32_t stride = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::size_t patch_count() const { return std::size_t{grid_h} * grid_w; }
  std::span<const float> patch(std::size_t row, std::size_t col) const {
    return {data.data() + (row * grid_w + col) * dim, dim};
  }
  std::span<float> patch(std::size_t row, std::size_t col) {
    return {data.data() + (row * grid_w + col) * dim, dim};
  }
  bool operator==(const PatchGrid&) const = default;
};

inline constexpr char kEmbeddingMagic[4] = {'B', 'W', 'L', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

// Throws FormatError (kInvalidField) if the grid breaks a structural
// invariant: zero extents, payload size mismatch, non-finite or all-zero
// vectors.
void validate(const PatchGrid& grid);

// Writes the BWLE layout. An empty sequence produces a header with dim 0.
std::size_t write_embeddings(std::span<const PatchGrid> grids, const std::filesystem::path& path);

// Reads and validates every record. Values are returned exactly as stored.
std::vector<PatchGrid> read_embeddings(const std::filesystem::path& path);

// Streaming reader for files too large to hold in memory.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path);

  std::uint32_t dim() const { return dim_; }
  // Next record, or nullopt at a clean end of file.
  std::optional<PatchGrid> next();

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint32_t dim_ = 0;
  std::uintmax_t remaining_ = 0;
};

// Returns `v / ‖v‖₂`. Throws DegenerateInputError for a zero vector.
std::vector<float> normalize(std::span<const float> v);
void normalize_in_place(std::span<float> v);
// Normalizes every patch vector of the grid.
void normalize_grid(PatchGrid& grid);

// Pixel rectangle covered by patch (row, col). Throws IndexError when out of range.
PixelRect patch_rect(const PatchGrid& grid, std::uint32_t row, std::uint32_t col);

}  // namespace bowl
