#pragma once

#include <string>
#include <vector>

#include "tcplan/corpus/instances.hpp"
#include "tcplan/guidance/guidance.hpp"
#include "tcplan/metrics/metrics.hpp"
#include "tcplan/planner/model.hpp"
#include "tcplan/training/training.hpp"

namespace tcplan::metrics {

struct EvalOptions {
  guidance::FallbackPolicy policy = guidance::FallbackPolicy::Neutral;
  guidance::ExtractOptions extract;
  bool smooth_bleu = false;
};

struct InstanceOutcome {
  std::string sample_id;
  std::size_t turn = 0;
  std::vector<std::string> decoded;
  guidance::PromptChoice choice;
  PlanStep gold;
  PlanStep target;
  bool target_turn = false;
  std::string utterance;  // realized; empty without templates or a template for the action
};

struct Evaluation {
  MetricReport report;
  std::vector<InstanceOutcome> outcomes;
};

// Greedy-decodes every instance, selects the guiding prompt and scores the
// planning metrics. With templates the prompt is also realized and the
// dialogue metrics are scored against the gold system utterance; a prompt
// whose action has no template yields an empty candidate.
Evaluation evaluate(const planner::Model& model, const std::vector<corpus::Instance>& instances,
                    const guidance::TemplateTable* templates, const EvalOptions& opts = {});

// exp(mean cross-entropy over every plan token).
double planner_perplexity(const planner::Model& model, const std::vector<training::ExampleGroup>& groups);

}  // namespace tcplan::metrics
