#include "bowl/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "bowl/binary_io.hpp"
#include "bowl/error.hpp"

namespace bowl {

ExemplarSet::ExemplarSet(std::uint32_t dim, float lambda) : lambda_(lambda) { embeddings_.dim = dim; }

std::uint64_t ExemplarSet::total_count() const {
  std::uint64_t total = 0;
  for (const auto& e : info_) total += e.count;
  return total;
}

void ExemplarSet::push_back(std::span<const float> unit_embedding, const ExemplarInfo& info) {
  if (unit_embedding.size() != dim())
    throw DimensionError("exemplar dim " + std::to_string(unit_embedding.size()) + " vs set dim " +
                         std::to_string(dim()));
  embeddings_.append(unit_embedding);
  info_.push_back(info);
}

bool ExemplarSet::operator==(const ExemplarSet& other) const {
  return dim() == other.dim() && lambda_ == other.lambda_ && info_ == other.info_ &&
         embeddings_.data == other.embeddings_.data;
}

MaxSim nearest_exemplar(std::span<const float> unit_query, const ExemplarSet& set) {
  if (unit_query.size() != set.dim())
    throw DimensionError("query dim " + std::to_string(unit_query.size()) + " vs exemplar dim " +
                         std::to_string(set.dim()));
  return max_similarity(unit_query, set.embeddings());
}

float s_max(std::span<const float> unit_query, const ExemplarSet& set) {
  return nearest_exemplar(unit_query, set).similarity;
}

CodebookBuilder::CodebookBuilder(std::uint32_t dim, float lambda) : set_(dim, lambda) {
  if (dim == 0) throw DimensionError("codebook dim must be >= 1");
  if (!(lambda > -1.0f && lambda < 1.0f))
    throw ConfigError("lambda must lie in (-1, 1), got " + std::to_string(lambda));
}

void CodebookBuilder::add(std::span<const float> unit_embedding, const Provenance& provenance) {
  const MaxSim best = nearest_exemplar(unit_embedding, set_);
  if (best.similarity < set_.lambda()) {
    set_.push_back(unit_embedding, ExemplarInfo{1, provenance, set_.size()});
  } else {
    ++set_.info_[best.index].count;
  }
  ++seen_;
}

void CodebookBuilder::add_grid(const PatchGrid& grid) {
  if (grid.dim != set_.dim())
    throw DimensionError("grid dim " + std::to_string(grid.dim) + " vs codebook dim " + std::to_string(set_.dim()));
  scratch_.resize(grid.dim);
  for (std::uint32_t r = 0; r < grid.grid_h; ++r) {
    for (std::uint32_t c = 0; c < grid.grid_w; ++c) {
      auto p = grid.patch(r, c);
      std::copy(p.begin(), p.end(), scratch_.begin());
      normalize_in_place(scratch_);
      add(scratch_, Provenance{grid.image_id, r, c});
    }
  }
}

ExemplarSet CodebookBuilder::finish() && { return std::move(set_); }

ExemplarSet build_exemplars(std::span<const PatchGrid> stream, float lambda) {
  if (stream.empty()) {
    if (!(lambda > -1.0f && lambda < 1.0f))
      throw ConfigError("lambda must lie in (-1, 1), got " + std::to_string(lambda));
    return ExemplarSet(0, lambda);
  }
  CodebookBuilder builder(stream.front().dim, lambda);
  for (const PatchGrid& g : stream) builder.add_grid(g);
  return std::move(builder).finish();
}

ExemplarSet top_n(const ExemplarSet& set, std::size_t n) {
  if (n == 0) throw ConfigError("top-n requires n >= 1");
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable sort keeps equal counts in insertion order.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.info(a).count > set.info(b).count; });
  order.resize(std::min(n, order.size()));
  ExemplarSet out(set.dim(), set.lambda());
  for (std::size_t i : order) out.push_back(set.embedding(i), set.info(i));
  return out;
}

void save_exemplars(const ExemplarSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kExemplarMagic, 4);
  io::put_le(out, kExemplarVersion);
  io::put_le(out, set.dim());
  io::put_le(out, set.lambda());
  io::put_le(out, static_cast<std::uint32_t>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ExemplarInfo& e = set.info(i);
    io::put_floats(out, set.embedding(i));
    io::put_le(out, e.count);
    io::put_le(out, e.provenance.image_id);
    io::put_le(out, e.provenance.row);
    io::put_le(out, e.provenance.col);
    io::put_le(out, e.insertion_index);
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

ExemplarSet load_exemplars(const std::filesystem::path& path) {
  const std::string where = "'" + path.string() + "'";
  std::error_code ec;
  const std::uintmax_t size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError(where + ": no such file or unreadable");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + where);

  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError(FormatErrorKind::kTruncated, where + ": truncated header");
  if (std::memcmp(magic, kExemplarMagic, 4) != 0)
    throw FormatError(FormatErrorKind::kBadMagic, where + ": bad magic, not a BWLX exemplar file");
  std::uint32_t version = 0, dim = 0, count = 0;
  float lambda = 0.0f;
  if (!io::get_le(in, version)) throw FormatError(FormatErrorKind::kTruncated, where + ": truncated header");
  if (version != kExemplarVersion)
    throw FormatError(FormatErrorKind::kVersionMismatch, where + ": unsupported version " + std::to_string(version));
  if (!io::get_le(in, dim) || !io::get_le(in, lambda) || !io::get_le(in, count))
    throw FormatError(FormatErrorKind::kTruncated, where + ": truncated header");

  const std::uintmax_t record = std::uintmax_t{dim} * 4 + 8 + 8 + 4 + 4 + 8;
  const std::uintmax_t expected = 20 + record * count;
  if (size < expected) throw FormatError(FormatErrorKind::kTruncated, where + ": truncated exemplar records");
  if (size > expected) throw FormatError(FormatErrorKind::kTrailingBytes, where + ": trailing bytes after records");
  if (count > 0 && dim == 0) throw FormatError(FormatErrorKind::kInvalidField, where + ": dim 0 with exemplars");

  ExemplarSet set(dim, lambda);
  std::vector<float> emb(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    ExemplarInfo e;
    io::get_floats(in, emb);
    io::get_le(in, e.count);
    io::get_le(in, e.provenance.image_id);
    io::get_le(in, e.provenance.row);
    io::get_le(in, e.provenance.col);
    io::get_le(in, e.insertion_index);
    double sq = 0.0;
    for (float x : emb) sq += double{x} * x;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-5 || e.count < 1)
      throw FormatError(FormatErrorKind::kInvalidField, where + ": exemplar " + std::to_string(i) +
                                                            " is not unit-norm or has zero count");
    set.push_back(emb, e);
  }
  return set;
}

}  // namespace bowl
