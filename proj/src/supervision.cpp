#include "bowl/supervision.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "bowl/error.hpp"

namespace bowl {
namespace {

using Key = std::pair<std::uint64_t, std::uint64_t>;

std::map<Key, const PredictionRecord*> index_predictions(std::span<const PredictionRecord> preds) {
  std::map<Key, const PredictionRecord*> idx;
  for (const auto& p : preds) idx.emplace(Key{p.image_id, p.anchor_index}, &p);
  return idx;
}

const PredictionRecord& lookup(const std::map<Key, const PredictionRecord*>& idx, const TargetRecord& t) {
  const auto it = idx.find({t.image_id, t.anchor_index});
  if (it == idx.end())
    throw CoverageError("no prediction for image " + std::to_string(t.image_id) + " anchor " +
                        std::to_string(t.anchor_index));
  return *it->second;
}

double objectness_term(const std::map<Key, const PredictionRecord*>& idx, std::span<const TargetRecord> targets,
                       bool include_negatives) {
  std::vector<double> logits, goals;
  for (const auto& t : targets) {
    if (t.role == Role::kNegative && !include_negatives) continue;
    logits.push_back(lookup(idx, t).objectness_logit);
    goals.push_back(t.objectness);
  }
  return objectness_loss_dense(logits, goals);
}

double regression_mean(const std::map<Key, const PredictionRecord*>& idx, std::span<const TargetRecord> targets) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : targets) {
    if (t.role != Role::kPositive) continue;
    const auto& p = lookup(idx, t);
    if (!p.regression || !t.regression)
      throw CoverageError("positive anchor " + std::to_string(t.anchor_index) + " lacks a regression value");
    const Ltrb& a = *p.regression;
    const Ltrb& b = *t.regression;
    sum += (std::abs(a.l - b.l) + std::abs(a.r - b.r) + std::abs(a.t - b.t) + std::abs(a.b - b.b)) / 4.0;
    ++count;
  }
  return count == 0 ? 0.0 : sum / double(count);
}

}  // namespace

std::vector<TargetRecord> assign_targets(std::uint64_t image_id, std::span<const AnchorLabel> labels,
                                         std::span<const AnchorBox> anchors, std::span<const GtBox> gts,
                                         AssignStats* stats) {
  AssignStats local;
  std::vector<TargetRecord> out;
  for (const AnchorLabel& label : labels) {
    if (label.anchor_index >= anchors.size())
      throw ConsistencyError("label refers to anchor " + std::to_string(label.anchor_index) + " beyond " +
                             std::to_string(anchors.size()) + " anchors");
    const AnchorBox& anchor = anchors[label.anchor_index];
    if (label.role == Role::kPositive) {
      if (!label.matched_gt || *label.matched_gt >= gts.size())
        throw ConsistencyError("positive anchor " + std::to_string(label.anchor_index) + " has no matched GT");
      const Box& gt = gts[*label.matched_gt].box;
      const auto ltrb = ltrb_target(anchor.center, gt);
      if (!ltrb) {
        ++local.dropped_positives;
        continue;
      }
      out.push_back({image_id, label.anchor_index, Role::kPositive, ltrb, centerness(anchor.center, gt)});
      ++local.positives;
    } else if (label.role == Role::kNegative) {
      out.push_back({image_id, label.anchor_index, Role::kNegative, std::nullopt, 0.0});
      ++local.negatives;
    }
  }
  if (stats) {
    stats->positives += local.positives;
    stats->negatives += local.negatives;
    stats->dropped_positives += local.dropped_positives;
  }
  return out;
}

std::vector<TargetRecord> cap_per_role(std::span<const TargetRecord> records, std::size_t cap, std::uint64_t seed) {
  std::map<std::pair<std::uint64_t, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    groups[{records[i].image_id, static_cast<int>(records[i].role)}].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<bool> keep(records.size(), false);
  for (auto& [key, members] : groups) {
    // Partial Fisher-Yates; the first `cap` slots are the sample.
    const std::size_t take = std::min(cap, members.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + std::uniform_int_distribution<std::size_t>(0, members.size() - 1 - i)(rng);
      std::swap(members[i], members[j]);
      keep[members[i]] = true;
    }
  }
  std::vector<TargetRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double objectness_loss_dense(std::span<const double> logits, std::span<const double> targets,
                             std::span<double> grad) {
  if (logits.size() != targets.size()) throw CoverageError("logit and target counts differ");
  if (!grad.empty() && grad.size() != logits.size()) throw CoverageError("gradient buffer has the wrong size");
  const std::size_t n = logits.size();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / double(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = sigmoid(logits[i]);
    const double diff = s - targets[i];
    sum += std::abs(diff);
    if (!grad.empty()) {
      const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      grad[i] = sign * s * (1.0 - s) * inv_n;
    }
  }
  return sum * inv_n;
}

double objectness_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets) {
  return objectness_term(index_predictions(preds), targets, true);
}

std::vector<double> objectness_loss_gradient(std::span<const PredictionRecord> preds,
                                             std::span<const TargetRecord> targets) {
  std::map<Key, std::size_t> pos;
  for (std::size_t i = 0; i < preds.size(); ++i) pos.emplace(Key{preds[i].image_id, preds[i].anchor_index}, i);
  std::vector<double> logits, goals;
  std::vector<std::size_t> where;
  for (const auto& t : targets) {
    const auto it = pos.find({t.image_id, t.anchor_index});
    if (it == pos.end())
      throw CoverageError("no prediction for image " + std::to_string(t.image_id) + " anchor " +
                          std::to_string(t.anchor_index));
    logits.push_back(preds[it->second].objectness_logit);
    goals.push_back(t.objectness);
    where.push_back(it->second);
  }
  std::vector<double> dense(logits.size());
  objectness_loss_dense(logits, goals, dense);
  std::vector<double> grad(preds.size(), 0.0);
  for (std::size_t i = 0; i < where.size(); ++i) grad[where[i]] += dense[i];
  return grad;
}

double regression_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets) {
  for (const auto& t : targets)
    if (t.role != Role::kPositive)
      throw ConsistencyError("regression loss takes positive targets only; anchor " +
                             std::to_string(t.anchor_index) + " is " + std::string(to_string(t.role)));
  return regression_mean(index_predictions(preds), targets);
}

LossBreakdown bowl_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets) {
  const auto idx = index_predictions(preds);
  LossBreakdown out;
  out.regression = regression_mean(idx, targets);
  out.objectness = objectness_term(idx, targets, true);
  out.total = out.regression + out.objectness;
  return out;
}

LossBreakdown oln_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets) {
  const auto idx = index_predictions(preds);
  LossBreakdown out;
  out.regression = regression_mean(idx, targets);
  out.objectness = objectness_term(idx, targets, false);
  out.total = out.regression + out.objectness;
  return out;
}

LossBreakdown closed_world_loss(std::span<const PredictionRecord> preds, std::span<const TargetRecord> targets) {
  const auto idx = index_predictions(preds);
  LossBreakdown out;
  out.regression = regression_mean(idx, targets);
  double sum = 0.0;
  for (const auto& t : targets) {
    const double z = lookup(idx, t).objectness_logit;
    const double y = t.role == Role::kPositive ? 1.0 : 0.0;
    // BCE with logits: max(z,0) - z*y + log(1 + e^-|z|)
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  out.objectness = targets.empty() ? 0.0 : sum / double(targets.size());
  out.total = out.regression + out.objectness;
  return out;
}

// ---------------------------------------------------------------------------
// Target file: one tab-separated record per line,
//   image_id  anchor_index  role  objectness  [l r t b]

void write_targets(std::span<const TargetRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char buf[64];
  for (const auto& r : records) {
    out << r.image_id << '\t' << r.anchor_index << '\t' << to_string(r.role);
    std::snprintf(buf, sizeof buf, "\t%.17g", r.objectness);
    out << buf;
    if (r.regression) {
      for (double v : {r.regression->l, r.regression->r, r.regression->t, r.regression->b}) {
        std::snprintf(buf, sizeof buf, "\t%.17g", v);
        out << buf;
      }
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

template <typename T>
T parse_number(const std::string& field, std::size_t line, const char* what) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(line, std::string("bad ") + what + " '" + field + "'");
  return value;
}

}  // namespace

std::vector<TargetRecord> read_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("'" + path.string() + "': no such file or unreadable");
  std::vector<TargetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 4 && fields.size() != 8)
      throw ParseError(lineno, "expected 4 or 8 tab-separated fields, got " + std::to_string(fields.size()));
    TargetRecord r;
    r.image_id = parse_number<std::uint64_t>(fields[0], lineno, "image_id");
    r.anchor_index = parse_number<std::uint64_t>(fields[1], lineno, "anchor_index");
    const auto role = parse_role(fields[2]);
    if (!role || *role == Role::kIgnored) throw ParseError(lineno, "unknown role '" + fields[2] + "'");
    r.role = *role;
    r.objectness = parse_number<double>(fields[3], lineno, "objectness");
    if (!(r.objectness >= 0.0 && r.objectness <= 1.0)) throw ParseError(lineno, "objectness outside [0, 1]");
    if (fields.size() == 8) {
      r.regression = Ltrb{parse_number<double>(fields[4], lineno, "l"), parse_number<double>(fields[5], lineno, "r"),
                          parse_number<double>(fields[6], lineno, "t"), parse_number<double>(fields[7], lineno, "b")};
    }
    if (r.role == Role::kPositive && !r.regression) throw ParseError(lineno, "positive record without l,r,t,b");
    if (r.role == Role::kNegative && (r.regression || r.objectness != 0.0))
      throw ParseError(lineno, "negative record must have objectness 0 and no regression target");
    out.push_back(r);
  }
  return out;
}

}  // namespace bowl
