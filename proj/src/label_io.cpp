#include "bowl/label_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "bowl/error.hpp"

namespace bowl {
namespace {

constexpr const char* kHeader = "image_id\tanchor_index\tlevel\trole\tmatched_gt\ts_max";

template <typename T>
T parse_field(const std::string& field, std::size_t line, const char* what) {
  T value{};
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(line, std::string("bad ") + what + " '" + field + "'");
  return value;
}

}  // namespace

void write_label_table(std::span<const LabelRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << kHeader << '\n';
  char buf[32];
  for (const auto& r : rows) {
    out << r.image_id << '\t' << r.label.anchor_index << '\t' << r.level << '\t' << to_string(r.label.role) << '\t';
    if (r.label.matched_gt) out << *r.label.matched_gt;
    else out << '-';
    out << '\t';
    if (r.label.similarity) {
      std::snprintf(buf, sizeof buf, "%.9g", double(*r.label.similarity));
      out << buf;
    } else {
      out << '-';
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<LabelRow> read_label_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("'" + path.string() + "': no such file or unreadable");
  std::vector<LabelRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kHeader) throw ParseError(lineno, "missing label table header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, '\t');) f.push_back(cell);
    if (f.size() != 6) throw ParseError(lineno, "expected 6 fields, got " + std::to_string(f.size()));
    LabelRow r;
    r.image_id = parse_field<std::uint64_t>(f[0], lineno, "image_id");
    r.label.anchor_index = parse_field<std::size_t>(f[1], lineno, "anchor_index");
    r.level = parse_field<int>(f[2], lineno, "level");
    const auto role = parse_role(f[3]);
    if (!role) throw ParseError(lineno, "unknown role '" + f[3] + "'");
    r.label.role = *role;
    if (f[4] != "-") r.label.matched_gt = parse_field<std::size_t>(f[4], lineno, "matched_gt");
    if (f[5] != "-") r.label.similarity = parse_field<float>(f[5], lineno, "s_max");
    if (r.label.role == Role::kPositive && !r.label.matched_gt)
      throw ParseError(lineno, "positive anchor without matched_gt");
    rows.push_back(r);
  }
  if (lineno == 0) throw ParseError(1, "empty label table");
  return rows;
}

}  // namespace bowl
