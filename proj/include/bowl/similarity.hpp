#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace bowl {

// Row-major matrix of unit vectors, `dim` floats per row.
struct VectorMatrix {
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  void append(std::span<const float> v) { data.insert(data.end(), v.begin(), v.end()); }
};

inline constexpr float kNoSimilarity = -std::numeric_limits<float>::infinity();
inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

struct MaxSim {
  float similarity = kNoSimilarity;
  std::size_t index = kNoIndex;  // lowest index attaining the max
};

// Fixed-order dot product. Every similarity in the toolkit goes through this
// so that scalar, batched, and threaded scans agree bit for bit.
float dot(std::span<const float> a, std::span<const float> b);

// Max over rows of dot(query, row). Empty matrix yields {kNoSimilarity, kNoIndex}.
MaxSim max_similarity(std::span<const float> query, const VectorMatrix& rows);

// One MaxSim per query row; `threads` <= 1 runs on the calling thread.
std::vector<MaxSim> max_similarity_batch(const VectorMatrix& queries, const VectorMatrix& rows,
                                         unsigned threads = 1);

}  // namespace bowl
