#include "bowl/similarity.hpp"

#include <algorithm>
#include <thread>

#include "bowl/error.hpp"

namespace bowl {
namespace {

constexpr std::size_t kLanes = 16;

inline float dot_raw(const float* __restrict a, const float* __restrict b, std::size_t n) {
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += a[i + j] * b[i + j];
  for (std::size_t j = 0; i + j < n; ++j) acc[j] += a[i + j] * b[i + j];
  for (std::size_t w = kLanes / 2; w > 0; w /= 2)
    for (std::size_t j = 0; j < w; ++j) acc[j] += acc[j + w];
  return acc[0];
}

inline MaxSim scan(const float* q, const VectorMatrix& rows) {
  MaxSim best;
  const std::size_t n = rows.rows();
  const float* base = rows.data.data();
  for (std::size_t r = 0; r < n; ++r) {
    const float s = dot_raw(q, base + r * rows.dim, rows.dim);
    if (s > best.similarity) {
      best.similarity = s;
      best.index = r;
    }
  }
  return best;
}

}  // namespace

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw DimensionError("dot of vectors with dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  return dot_raw(a.data(), b.data(), a.size());
}

MaxSim max_similarity(std::span<const float> query, const VectorMatrix& rows) {
  if (rows.rows() > 0 && query.size() != rows.dim)
    throw DimensionError("query dim " + std::to_string(query.size()) + " vs set dim " + std::to_string(rows.dim));
  return scan(query.data(), rows);
}

std::vector<MaxSim> max_similarity_batch(const VectorMatrix& queries, const VectorMatrix& rows, unsigned threads) {
  if (rows.rows() > 0 && queries.rows() > 0 && queries.dim != rows.dim)
    throw DimensionError("query dim " + std::to_string(queries.dim) + " vs set dim " + std::to_string(rows.dim));
  const std::size_t n = queries.rows();
  std::vector<MaxSim> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) out[q] = scan(queries.data.data() + q * queries.dim, rows);
  };
  const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n / 64 + 1)));
  if (t <= 1) {
    work(0, n);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + t - 1) / t;
    for (unsigned w = 0; w < t; ++w) {
      const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
  }
  return out;
}

}  // namespace bowl
