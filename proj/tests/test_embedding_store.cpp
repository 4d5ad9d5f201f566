#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "bowl/embedding_store.hpp"
#include "bowl/error.hpp"
#include "test_util.hpp"

using namespace bowl;

namespace {

FormatErrorKind read_error_kind(const std::filesystem::path& p) {
  try {
    read_embeddings(p);
  } catch (const FormatError& e) {
    return e.format_kind();
  }
  FAIL("expected a format error");
  return FormatErrorKind::kInvalidField;
}

}  // namespace

TEST_CASE("empty sequence writes a header-only file") {
  testutil::TempDir dir("es");
  CHECK(write_embeddings({}, dir / "e.bwle") == 0);
  CHECK(std::filesystem::file_size(dir / "e.bwle") == 12);
  CHECK(read_embeddings(dir / "e.bwle").empty());
}

TEST_CASE("2x2 grid with d=4 round-trips bit-exactly") {
  testutil::TempDir dir("es");
  PatchGrid g{42, 2, 2, 16, 8, 4, {}};
  for (int i = 0; i < 16; ++i) g.data.push_back(0.1f * float(i + 1) * (i % 3 == 0 ? -1.0f : 1.0f));
  std::vector<PatchGrid> grids{g};
  CHECK(write_embeddings(grids, dir / "g.bwle") == 1);
  const auto back = read_embeddings(dir / "g.bwle");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == g);
  CHECK(std::memcmp(back[0].data.data(), g.data.data(), g.data.size() * 4) == 0);
}

TEST_CASE("layout is little-endian with the documented header") {
  testutil::TempDir dir("es");
  std::vector<PatchGrid> grids{{0x0102030405060708ULL, 1, 1, 16, 8, 2, {1.0f, -2.0f}}};
  write_embeddings(grids, dir / "g.bwle");
  const std::string b = testutil::slurp(dir / "g.bwle");
  REQUIRE(b.size() == 12 + 24 + 8);
  CHECK(b.substr(0, 4) == "BWLE");
  CHECK(b[4] == 1);
  CHECK(b[8] == 2);
  CHECK(static_cast<unsigned char>(b[12]) == 0x08);
  CHECK(static_cast<unsigned char>(b[19]) == 0x01);
  float f;
  std::memcpy(&f, b.data() + 36, 4);
  CHECK(f == 1.0f);
}

TEST_CASE("random grid sequences round-trip") {
  std::mt19937_64 rng(11);
  testutil::TempDir dir("es");
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<PatchGrid> grids;
    const std::uint32_t dim = 1 + rng() % 9;
    for (int i = 0; i < int(rng() % 5); ++i)
      grids.push_back(testutil::random_grid(rng, rng(), 1 + rng() % 4, 1 + rng() % 4, dim));
    write_embeddings(grids, dir / "r.bwle");
    CHECK(read_embeddings(dir / "r.bwle") == grids);
  }
}

TEST_CASE("mixed dims are rejected on write") {
  testutil::TempDir dir("es");
  std::mt19937_64 rng(1);
  std::vector<PatchGrid> grids{testutil::random_grid(rng, 1, 1, 1, 4), testutil::random_grid(rng, 2, 1, 1, 8)};
  try {
    write_embeddings(grids, dir / "m.bwle");
    FAIL("expected mixed-dim error");
  } catch (const FormatError& e) {
    CHECK(e.format_kind() == FormatErrorKind::kMixedDim);
  }
}

TEST_CASE("corrupt files raise distinct format errors") {
  testutil::TempDir dir("es");
  std::mt19937_64 rng(2);
  std::vector<PatchGrid> grids{testutil::random_grid(rng, 1, 2, 2, 4)};
  write_embeddings(grids, dir / "ok.bwle");
  const std::string good = testutil::slurp(dir / "ok.bwle");

  std::string bad = good;
  bad.replace(0, 4, "XXXX");
  testutil::dump(dir / "magic.bwle", bad);
  CHECK(read_error_kind(dir / "magic.bwle") == FormatErrorKind::kBadMagic);

  testutil::dump(dir / "trunc.bwle", good.substr(0, good.size() - 4));
  CHECK(read_error_kind(dir / "trunc.bwle") == FormatErrorKind::kTruncated);

  bad = good;
  bad[4] = 2;
  testutil::dump(dir / "ver.bwle", bad);
  CHECK(read_error_kind(dir / "ver.bwle") == FormatErrorKind::kVersionMismatch);

  testutil::dump(dir / "half.bwle", good.substr(0, 20));
  CHECK(read_error_kind(dir / "half.bwle") == FormatErrorKind::kTruncated);
}

TEST_CASE("records violating grid invariants fail validation on load") {
  testutil::TempDir dir("es");
  std::vector<PatchGrid> grids{{1, 1, 2, 16, 8, 2, {1.0f, 0.0f, 0.0f, 1.0f}}};
  CHECK_THROWS_AS(write_embeddings(std::vector<PatchGrid>{{1, 1, 2, 16, 8, 2, {1, 0, 0, 0}}}, dir / "w.bwle"),
                  FormatError);
  write_embeddings(grids, dir / "z.bwle");
  // Zero the second patch on disk: header 12 bytes, record header 24, then 2 floats.
  std::string bytes = testutil::slurp(dir / "z.bwle");
  std::fill(bytes.begin() + 12 + 24 + 8, bytes.end(), '\0');
  testutil::dump(dir / "z.bwle", bytes);
  CHECK(read_error_kind(dir / "z.bwle") == FormatErrorKind::kInvalidField);
  bytes[12 + 24 + 8 + 3] = char(0x7f);
  bytes[12 + 24 + 8 + 2] = char(0xc0);  // NaN
  testutil::dump(dir / "z.bwle", bytes);
  CHECK(read_error_kind(dir / "z.bwle") == FormatErrorKind::kInvalidField);
  CHECK_THROWS_AS(read_embeddings(dir / "missing.bwle"), IoError);
}

TEST_CASE("normalize") {
  const auto v = normalize(std::vector<float>{3.0f, 4.0f});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(normalize(std::vector<float>{0.0f, 1.0f, 0.0f}) == std::vector<float>{0.0f, 1.0f, 0.0f});
  CHECK_THROWS_AS(normalize(std::vector<float>{0.0f, 0.0f}), DegenerateInputError);
}

TEST_CASE("normalize yields unit norm and is idempotent") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 10.0f);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> v(1 + rng() % 64);
    for (auto& x : v) x = n(rng);
    const auto u = normalize(v);
    double s = 0;
    for (float x : u) s += double(x) * x;
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-6);
    const auto uu = normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(uu[i] - u[i]) < 1e-6);
  }
}

TEST_CASE("patch_rect") {
  PatchGrid g{1, 3, 4, 16, 8, 1, std::vector<float>(12, 1.0f)};
  CHECK(patch_rect(g, 0, 0) == PixelRect{0, 0, 16, 16});
  CHECK(patch_rect(g, 1, 2) == PixelRect{16, 8, 16, 16});
  CHECK_THROWS_AS(patch_rect(g, 3, 0), IndexError);
  CHECK_THROWS_AS(patch_rect(g, 0, 4), IndexError);
  for (std::uint32_t c = 0; c + 1 < 4; ++c) CHECK(patch_rect(g, 2, c + 1).x - patch_rect(g, 2, c).x == 8);
}
