#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tcplan/corpus/types.hpp"
#include "tcplan/planner/plan_path.hpp"

namespace tcplan::guidance {

using corpus::KnowledgeTriple;
using corpus::PlanStep;

// Actions that need no domain knowledge.
struct ChitChatActions {
  std::vector<std::string> substrings{"chit-chat"};
  bool matches(std::string_view action) const;
};

// Last step of the reverse-ordered path, i.e. the step nearest the current
// turn. Empty path raises GuidanceError.
PlanStep select_prompt(const planner::PlanPath& path);

enum class FallbackPolicy {
  Target,   // answer with the designated target step
  Neutral,  // answer with a topic-free chit-chat step
};

inline const PlanStep kNeutralStep{"chit-chat", "NULL"};

struct PromptChoice {
  PlanStep step;
  planner::PlanPath path;  // parsed path, or the longest valid prefix
  bool parsed = false;     // the whole decoded sequence was grammatical
  bool fallback = false;   // no usable step; policy step was used
  std::string note;
};

// Parses decoded plan tokens and picks the guiding prompt. A partial parse
// uses its longest valid prefix; an empty one falls back per policy.
PromptChoice choose_prompt(const std::vector<std::string>& decoded, const PlanStep& target,
                           corpus::TokenizerMode mode, FallbackPolicy policy);

struct ExtractOptions {
  bool include_object_matches = false;
  ChitChatActions chit_chat;
};

// Topic-centric triples: those whose subject equals the topic, in corpus
// order. Empty for NULL topics and chit-chat actions.
std::vector<KnowledgeTriple> extract_knowledge(std::string_view topic, std::string_view action,
                                               const std::vector<KnowledgeTriple>& triples,
                                               const ExtractOptions& opts = {});

// "[PROFILE] ... [KNOWLEDGE] ... [HISTORY] ... [ACTION] ..."
std::string build_generation_input(const corpus::UserProfile& profile, const std::vector<KnowledgeTriple>& extracted,
                                   const std::vector<corpus::Turn>& history, std::string_view action);

// action -> utterance templates with {topic} {relation} {object} slots.
// Several lines for one action are variants; the variant is chosen from a
// hash of the generation input, so equal inputs realize equal utterances.
class TemplateTable {
 public:
  void add(std::string action, std::string tmpl);
  bool covers(std::string_view action) const;
  const std::vector<std::string>& variants(std::string_view action) const;
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const noexcept { return table_; }

  // One line per template: action<TAB>template.
  static TemplateTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> table_;
};

// Fills the prompt action's template. Guarantees the topic appears verbatim
// when it is not NULL. Missing template raises RealizationError.
std::string realize(std::string_view input, const PlanStep& prompt, const std::vector<KnowledgeTriple>& extracted,
                    const TemplateTable& templates);

}  // namespace tcplan::guidance
