#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bowl/codebook.hpp"
#include "bowl/evalkit.hpp"
#include "bowl/labeler.hpp"
#include "bowl/similarity.hpp"
#include "bowl/supervision.hpp"
#include "bowl/synthetic.hpp"

namespace bowl {

// Linear objectness scorer over pooled anchor embeddings.
struct ProbeModel {
  std::vector<double> weights;
  double bias = 0.0;
  bool operator==(const ProbeModel&) const = default;
};

enum class ProbeCondition { kPositivesOnly, kWithNegatives };
std::string_view to_string(ProbeCondition c);
std::optional<ProbeCondition> parse_condition(std::string_view text);

struct ProbeConfig {
  double learning_rate = 4.0;
  int epochs = 400;
  std::uint64_t seed = 0;
  ProbeCondition condition = ProbeCondition::kWithNegatives;

  void validate() const;
};

// Full-batch gradient descent on the objectness loss. `features` row i is the
// pooled embedding of `targets[i]`'s anchor. Negative records are dropped in
// the positives-only condition. Throws ConfigError with nothing to train on.
ProbeModel train_probe(const VectorMatrix& features, std::span<const TargetRecord> targets, const ProbeConfig& config);

// sigmoid(w . phi + b) per feature row.
std::vector<double> score_anchors(const ProbeModel& model, const VectorMatrix& features);

double probe_loss(const ProbeModel& model, const VectorMatrix& features, std::span<const TargetRecord> targets);

struct ExperimentConfig {
  ProbeConfig probe;
  LabelingConfig labeling;
  std::size_t budget = kDefaultBudget;
};

struct ConditionResult {
  ProbeCondition condition = ProbeCondition::kWithNegatives;
  std::optional<double> ar_novel;
  std::optional<double> ar_all;
  std::size_t positives = 0, negatives = 0;
  ProbeModel model;
};

struct AbResult {
  ConditionResult with_negatives;
  ConditionResult positives_only;
};

// Labels the training split against `exemplars`, trains both conditions with
// identical seeds and data, scores every anchor of the evaluation split and
// reports AR_N / AR_A with the anchors themselves as detection boxes.
AbResult ab_experiment(const SyntheticDataset& dataset, const ExemplarSet& exemplars, const ExperimentConfig& config);

// Text table: condition, AR_N, AR_A, seed.
std::string format_ab_report(const AbResult& result, std::uint64_t seed);

}  // namespace bowl
