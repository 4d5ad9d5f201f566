#include "bowl/probe.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "bowl/error.hpp"

namespace bowl {

std::string_view to_string(ProbeCondition c) {
  return c == ProbeCondition::kWithNegatives ? "with_negatives" : "positives_only";
}

std::optional<ProbeCondition> parse_condition(std::string_view text) {
  if (text == "with_negatives") return ProbeCondition::kWithNegatives;
  if (text == "positives_only") return ProbeCondition::kPositivesOnly;
  return std::nullopt;
}

void ProbeConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("probe learning rate must be > 0");
  if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
}

namespace {

double logit(const ProbeModel& m, std::span<const float> phi) {
  double z = m.bias;
  for (std::size_t k = 0; k < phi.size(); ++k) z += m.weights[k] * phi[k];
  return z;
}

}  // namespace

ProbeModel train_probe(const VectorMatrix& features, std::span<const TargetRecord> targets, const ProbeConfig& config) {
  config.validate();
  if (features.rows() != targets.size()) throw DimensionError("one feature row per target record is required");

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (config.condition == ProbeCondition::kWithNegatives || targets[i].role == Role::kPositive) rows.push_back(i);
  if (rows.empty()) throw ConfigError("no training records for the probe");

  ProbeModel m;
  m.weights.resize(features.dim);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (double& w : m.weights) w = init(rng);

  std::vector<double> logits(rows.size()), goals(rows.size()), grad(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) goals[j] = targets[rows[j]].objectness;
  std::vector<double> step(features.dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t j = 0; j < rows.size(); ++j) logits[j] = logit(m, features.row(rows[j]));
    objectness_loss_dense(logits, goals, grad);
    std::fill(step.begin(), step.end(), 0.0);
    double bias_step = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto phi = features.row(rows[j]);
      for (std::size_t k = 0; k < phi.size(); ++k) step[k] += grad[j] * phi[k];
      bias_step += grad[j];
    }
    for (std::size_t k = 0; k < step.size(); ++k) m.weights[k] -= config.learning_rate * step[k];
    m.bias -= config.learning_rate * bias_step;
  }
  return m;
}

std::vector<double> score_anchors(const ProbeModel& model, const VectorMatrix& features) {
  if (features.rows() > 0 && features.dim != model.weights.size())
    throw DimensionError("feature dim " + std::to_string(features.dim) + " vs probe dim " +
                         std::to_string(model.weights.size()));
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(logit(model, features.row(i)));
  return out;
}

double probe_loss(const ProbeModel& model, const VectorMatrix& features, std::span<const TargetRecord> targets) {
  if (features.rows() != targets.size()) throw DimensionError("one feature row per target record is required");
  std::vector<double> logits(targets.size()), goals(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    logits[i] = logit(model, features.row(i));
    goals[i] = targets[i].objectness;
  }
  return objectness_loss_dense(logits, goals);
}

AbResult ab_experiment(const SyntheticDataset& dataset, const ExemplarSet& exemplars, const ExperimentConfig& config) {
  if (exemplars.empty()) throw ConfigError("the A/B experiment needs a nonempty exemplar set");
  config.probe.validate();

  VectorMatrix train_features;
  train_features.dim = exemplars.dim();
  std::vector<TargetRecord> train_targets;
  std::vector<float> buf(exemplars.dim());
  for (std::uint64_t id : dataset.train_ids) {
    PatchGrid grid = dataset.grid(id);
    normalize_grid(grid);
    const CocoImage* img = dataset.annotations.find_image(id);
    std::vector<GtBox> gts;
    for (const auto& g : dataset.annotations.annotations_for(id)) gts.push_back(g.gt);
    const auto labeled = label_image(grid, img->width, img->height, gts, exemplars, config.labeling);
    const auto records = assign_targets(id, labeled.labels, labeled.anchors, gts);
    const AnchorPooler pooler(grid);
    for (const auto& r : records) {
      if (!pooler.pool_into(labeled.anchors[r.anchor_index].box, buf)) continue;
      train_features.append(buf);
      train_targets.push_back(r);
    }
  }

  // Every anchor of the evaluation split is a candidate detection.
  VectorMatrix eval_features;
  eval_features.dim = exemplars.dim();
  std::vector<Detection> candidates;
  std::vector<GtRecord> gts_all, gts_base, gts_novel;
  for (std::uint64_t id : dataset.eval_ids) {
    PatchGrid grid = dataset.grid(id);
    normalize_grid(grid);
    const CocoImage* img = dataset.annotations.find_image(id);
    const AnchorPooler pooler(grid);
    for (const auto& a : generate_anchors(img->width, img->height, config.labeling.anchors)) {
      const auto box = clip(a.box, img->width, img->height);
      if (!box || !pooler.pool_into(a.box, buf)) continue;
      eval_features.append(buf);
      candidates.push_back({id, *box, 0.0});
    }
    for (const auto& g : dataset.annotations.annotations_for(id)) {
      gts_all.push_back(g);
      (g.gt.is_base ? gts_base : gts_novel).push_back(g);
    }
  }

  auto run = [&](ProbeCondition condition) {
    ConditionResult out;
    out.condition = condition;
    ProbeConfig pc = config.probe;
    pc.condition = condition;
    for (const auto& t : train_targets) (t.role == Role::kPositive ? out.positives : out.negatives)++;
    if (condition == ProbeCondition::kPositivesOnly) out.negatives = 0;
    out.model = train_probe(train_features, train_targets, pc);
    const auto scores = score_anchors(out.model, eval_features);
    std::vector<Detection> dets = candidates;
    for (std::size_t i = 0; i < dets.size(); ++i) dets[i].score = scores[i];
    out.ar_novel = ar_novel(dets, gts_base, gts_novel, config.budget);
    out.ar_all = average_recall(dets, gts_all, config.budget);
    return out;
  };
  return {run(ProbeCondition::kWithNegatives), run(ProbeCondition::kPositivesOnly)};
}

std::string format_ab_report(const AbResult& result, std::uint64_t seed) {
  std::string out = "condition\tAR_N\tAR_A\tseed\n";
  char line[160];
  for (const ConditionResult* c : {&result.with_negatives, &result.positives_only}) {
    std::snprintf(line, sizeof line, "%s\t%.6f\t%.6f\t%llu\n", std::string(to_string(c->condition)).c_str(),
                  c->ar_novel.value_or(std::nan("")), c->ar_all.value_or(std::nan("")),
                  static_cast<unsigned long long>(seed));
    out += line;
  }
  return out;
}

}  // namespace bowl
