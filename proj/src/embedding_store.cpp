#include "bowl/embedding_store.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "bowl/binary_io.hpp"
#include "bowl/error.hpp"

namespace bowl {
namespace {

constexpr std::uintmax_t kFileHeaderBytes = 4 + 4 + 4;
constexpr std::uintmax_t kRecordHeaderBytes = 8 + 4 * 4;

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

}  // namespace

void validate(const PatchGrid& grid) {
  auto fail = [&](const std::string& why) {
    throw FormatError(FormatErrorKind::kInvalidField,
                      "image " + std::to_string(grid.image_id) + ": " + why);
  };
  if (grid.grid_h < 1 || grid.grid_w < 1) fail("grid extents must be >= 1");
  if (grid.dim < 1) fail("dim must be >= 1");
  if (grid.stride < 1) fail("stride must be >= 1");
  if (grid.patch_size < 1) fail("patch_size must be >= 1");
  if (grid.data.size() != grid.patch_count() * grid.dim) fail("payload size does not match grid_h*grid_w*dim");
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    const float* v = grid.data.data() + p * grid.dim;
    bool nonzero = false;
    for (std::uint32_t k = 0; k < grid.dim; ++k) {
      if (!std::isfinite(v[k])) fail("non-finite value in patch " + std::to_string(p));
      nonzero |= v[k] != 0.0f;
    }
    if (!nonzero) fail("zero vector in patch " + std::to_string(p));
  }
}

std::size_t write_embeddings(std::span<const PatchGrid> grids, const std::filesystem::path& path) {
  const std::uint32_t dim = grids.empty() ? 0 : grids.front().dim;
  for (const PatchGrid& g : grids) {
    if (g.dim != dim)
      throw FormatError(FormatErrorKind::kMixedDim, "mixed embedding dims " + std::to_string(dim) + " and " +
                                                        std::to_string(g.dim) + " in one file");
    validate(g);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + describe(path) + " for writing");
  out.write(kEmbeddingMagic, 4);
  io::put_le(out, kEmbeddingVersion);
  io::put_le(out, dim);
  for (const PatchGrid& g : grids) {
    io::put_le(out, g.image_id);
    io::put_le(out, g.grid_h);
    io::put_le(out, g.grid_w);
    io::put_le(out, g.patch_size);
    io::put_le(out, g.stride);
    io::put_floats(out, g.data);
  }
  out.flush();
  if (!out) throw IoError("write to " + describe(path) + " failed");
  return grids.size();
}

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  const std::uintmax_t size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError(describe(path) + ": no such file or unreadable");
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open " + describe(path));

  char magic[4] = {};
  in_.read(magic, 4);
  if (in_.gcount() != 4) throw FormatError(FormatErrorKind::kTruncated, describe(path) + ": truncated header");
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0)
    throw FormatError(FormatErrorKind::kBadMagic, describe(path) + ": bad magic, not a BWLE embedding file");
  std::uint32_t version = 0;
  if (!io::get_le(in_, version) || !io::get_le(in_, dim_))
    throw FormatError(FormatErrorKind::kTruncated, describe(path) + ": truncated header");
  if (version != kEmbeddingVersion)
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      describe(path) + ": unsupported version " + std::to_string(version));
  remaining_ = size - kFileHeaderBytes;
}

std::optional<PatchGrid> EmbeddingReader::next() {
  if (remaining_ == 0) return std::nullopt;
  if (remaining_ < kRecordHeaderBytes)
    throw FormatError(FormatErrorKind::kTruncated, describe(path_) + ": truncated record header");
  PatchGrid g;
  io::get_le(in_, g.image_id);
  io::get_le(in_, g.grid_h);
  io::get_le(in_, g.grid_w);
  io::get_le(in_, g.patch_size);
  io::get_le(in_, g.stride);
  g.dim = dim_;
  remaining_ -= kRecordHeaderBytes;
  const std::uintmax_t payload = std::uintmax_t{g.grid_h} * g.grid_w * dim_ * sizeof(float);
  if (payload > remaining_)
    throw FormatError(FormatErrorKind::kTruncated, describe(path_) + ": payload of image " +
                                                       std::to_string(g.image_id) + " is truncated");
  g.data.resize(payload / sizeof(float));
  if (!io::get_floats(in_, g.data))
    throw FormatError(FormatErrorKind::kTruncated, describe(path_) + ": short read");
  remaining_ -= payload;
  validate(g);
  return g;
}

std::vector<PatchGrid> read_embeddings(const std::filesystem::path& path) {
  EmbeddingReader reader(path);
  std::vector<PatchGrid> grids;
  while (auto g = reader.next()) grids.push_back(std::move(*g));
  return grids;
}

void normalize_in_place(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += double{x} * x;
  if (sq == 0.0) throw DegenerateInputError("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<float> normalize(std::span<const float> v) {
  std::vector<float> out(v.begin(), v.end());
  normalize_in_place(out);
  return out;
}

void normalize_grid(PatchGrid& grid) {
  for (std::size_t p = 0; p < grid.patch_count(); ++p)
    normalize_in_place(std::span<float>(grid.data.data() + p * grid.dim, grid.dim));
}

PixelRect patch_rect(const PatchGrid& grid, std::uint32_t row, std::uint32_t col) {
  if (row >= grid.grid_h || col >= grid.grid_w)
    throw IndexError("patch (" + std::to_string(row) + ", " + std::to_string(col) + ") outside " +
                     std::to_string(grid.grid_h) + "x" + std::to_string(grid.grid_w) + " grid");
  const int stride = static_cast<int>(grid.stride);
  const int size = static_cast<int>(grid.patch_size);
  return {static_cast<int>(col) * stride, static_cast<int>(row) * stride, size, size};
}

}  // namespace bowl
