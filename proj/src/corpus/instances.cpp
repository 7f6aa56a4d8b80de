#include "tcplan/corpus/instances.hpp"

#include <set>

#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"

namespace tcplan::corpus {

bool RecommendationActions::matches(std::string_view action) const {
  for (const auto& s : substrings) {
    if (action.find(s) != std::string_view::npos) return true;
  }
  return false;
}

DialogueSample create_target(const DialogueSample& sample, const RecommendationActions& rec) {
  if (sample.plans.empty()) throw TargetCreationError("sample '" + sample.id + "': plans are empty");
  for (std::size_t i = sample.plans.size(); i > 0; --i) {
    if (rec.matches(sample.plans[i - 1].action)) {
      DialogueSample out = sample;
      out.target = sample.plans[i - 1];
      return out;
    }
  }
  throw TargetCreationError("sample '" + sample.id + "': no recommendation step");
}

std::vector<DialogueSample> create_targets(const std::vector<DialogueSample>& samples,
                                           const RecommendationActions& rec, std::vector<std::string>* excluded) {
  std::vector<DialogueSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    try {
      out.push_back(create_target(s, rec));
    } catch (const TargetCreationError&) {
      if (excluded != nullptr) excluded->push_back(s.id);
    }
  }
  return out;
}

std::vector<Instance> make_training_instances(const DialogueSample& sample) {
  const auto target_idx = target_step_index(sample);
  if (!target_idx) throw TargetCreationError("sample '" + sample.id + "': target not created");
  const auto goals = turn_goals(sample);

  std::vector<std::size_t> system_turns;
  for (std::size_t t = 0; t < sample.turns.size(); ++t) {
    if (sample.turns[t].role != Role::System) continue;
    if (!goals[t]) {
      throw AlignmentError("sample '" + sample.id + "': system turn " + std::to_string(t) +
                           " is not covered by any plan step");
    }
    system_turns.push_back(t);
  }

  std::vector<Instance> out;
  for (std::size_t k = 0; k < system_turns.size(); ++k) {
    const std::size_t t = system_turns[k];
    const auto g = static_cast<std::size_t>(*goals[t]);
    if (g > *target_idx) continue;
    Instance inst;
    inst.sample = &sample;
    inst.turn = t;
    inst.target = *sample.target;
    for (std::size_t i = *target_idx + 1; i-- > g;) {
      const PlanStep& step = sample.plans[i];
      if (inst.label.empty() || !(inst.label.back() == step)) inst.label.push_back(step);
    }
    inst.gold = sample.plans[g];
    if (k > 0) inst.gold_prev = sample.plans[static_cast<std::size_t>(*goals[system_turns[k - 1]])];
    if (k + 1 < system_turns.size()) inst.gold_next = sample.plans[static_cast<std::size_t>(*goals[system_turns[k + 1]])];
    inst.target_turn = g == *target_idx;
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::string> decoder_prefix(const PlanStep& target, TokenizerMode mode) {
  std::vector<std::string> out{std::string(special::kTokens[special::kBos])};
  for (auto& t : tokenize(target.action, mode)) out.push_back(std::move(t));
  out.emplace_back(special::kTokens[special::kSep]);
  for (auto& t : topic_tokens(target.topic, mode)) out.push_back(std::move(t));
  out.emplace_back(special::kTokens[special::kSep]);
  return out;
}

std::vector<Instance> make_instances(const std::vector<DialogueSample>& samples) {
  std::vector<Instance> out;
  for (const auto& s : samples)
    for (auto& inst : make_training_instances(s)) out.push_back(std::move(inst));
  return out;
}

std::vector<DialogueSample> select_ids(const std::vector<DialogueSample>& samples,
                                       const std::vector<std::string>& ids) {
  std::set<std::string> wanted(ids.begin(), ids.end()), found;
  std::vector<DialogueSample> out;
  for (const auto& s : samples)
    if (wanted.count(s.id)) {
      out.push_back(s);
      found.insert(s.id);
    }
  for (const auto& id : wanted)
    if (!found.count(id)) throw SchemaError("split lists unknown sample id '" + id + "'");
  return out;
}

}  // namespace tcplan::corpus
