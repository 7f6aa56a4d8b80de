#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tcplan::corpus {

// Topic literal for steps that carry no entity.
inline constexpr std::string_view kNullTopic = "NULL";

struct ProfileEntry {
  std::string key;
  std::string value;
  friend bool operator==(const ProfileEntry&, const ProfileEntry&) = default;
};

// Ordered key/value pairs; order is the memory slot order.
struct UserProfile {
  std::vector<ProfileEntry> entries;
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct KnowledgeTriple {
  std::string subject;
  std::string relation;
  std::string object;
  friend bool operator==(const KnowledgeTriple&, const KnowledgeTriple&) = default;
};

enum class Role { User, System };

std::string_view role_name(Role r);

struct Turn {
  Role role = Role::User;
  std::string utterance;
  // Index into DialogueSample::plans of the step governing this turn.
  std::optional<int> goal_index;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct PlanStep {
  std::string action;
  std::string topic;

  bool null_topic() const { return topic == kNullTopic; }
  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct DialogueSample {
  std::string id;
  UserProfile profile;
  std::vector<KnowledgeTriple> knowledge;
  std::vector<Turn> turns;
  std::vector<PlanStep> plans;
  std::optional<PlanStep> target;

  friend bool operator==(const DialogueSample&, const DialogueSample&) = default;
};

// Trims and collapses whitespace runs to a single space.
std::string normalize_space(std::string_view s);

// Throws ValidationError on the first violated invariant.
void validate(const DialogueSample& sample);

// Plan index governing each turn; explicit goal_index wins, otherwise system
// turns map one-to-one onto plan steps when their counts agree.
std::vector<std::optional<int>> turn_goals(const DialogueSample& sample);

// Index of the designated target inside plans (last occurrence).
std::optional<std::size_t> target_step_index(const DialogueSample& sample);

}  // namespace tcplan::corpus
