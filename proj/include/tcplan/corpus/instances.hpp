#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/corpus/types.hpp"

namespace tcplan::corpus {

// Actions that count as recommendations. Default: any action containing
// "recommendation".
struct RecommendationActions {
  std::vector<std::string> substrings{"recommendation"};
  bool matches(std::string_view action) const;
};

// Sets target to the last plan step whose action is a recommendation.
// Raises TargetCreationError when there is none.
DialogueSample create_target(const DialogueSample& sample, const RecommendationActions& rec = {});

// Applies create_target to every sample; failures are excluded and their ids
// returned through `excluded`.
std::vector<DialogueSample> create_targets(const std::vector<DialogueSample>& samples,
                                           const RecommendationActions& rec,
                                           std::vector<std::string>* excluded = nullptr);

// One planning problem: predict the path from the target back to the step of
// system turn `turn`, given the turns before it.
struct Instance {
  const DialogueSample* sample = nullptr;  // not owned; must outlive the instance
  std::size_t turn = 0;                    // index of the system turn in sample->turns
  PlanStep target;
  std::vector<PlanStep> label;             // reverse order: label.front() == target
  PlanStep gold;                           // step governing `turn` (== label.back())
  std::optional<PlanStep> gold_prev;       // step of the previous system turn
  std::optional<PlanStep> gold_next;       // step of the following system turn
  bool target_turn = false;
};

// Requires a created target. System turns after the target step are skipped;
// a system turn without a governing step raises AlignmentError.
std::vector<Instance> make_training_instances(const DialogueSample& sample);

// Instances of every sample, in sample order. Samples must outlive them.
std::vector<Instance> make_instances(const std::vector<DialogueSample>& samples);

// Samples whose id is listed, in corpus order. An unknown id raises
// SchemaError.
std::vector<DialogueSample> select_ids(const std::vector<DialogueSample>& samples,
                                       const std::vector<std::string>& ids);

// [BOS] action tokens [SEP] topic tokens [SEP]
std::vector<std::string> decoder_prefix(const PlanStep& target, TokenizerMode mode);

}  // namespace tcplan::corpus
