#include "tcplan/corpus/types.hpp"

#include <cctype>
#include <unordered_set>

#include "tcplan/error.hpp"

namespace tcplan::corpus {

std::string_view role_name(Role r) { return r == Role::User ? "user" : "system"; }

std::string normalize_space(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(ch);
  }
  return out;
}

void validate(const DialogueSample& s) {
  const std::string where = s.id.empty() ? std::string("sample") : "sample '" + s.id + "'";
  if (s.plans.empty()) throw ValidationError(where + ": plans are empty");
  for (const auto& e : s.profile.entries) {
    if (e.key.empty()) throw ValidationError(where + ": empty profile key");
  }
  std::unordered_set<std::string> entities;
  for (const auto& t : s.knowledge) {
    if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
      throw ValidationError(where + ": knowledge triple with empty field");
    }
    entities.insert(t.subject);
    entities.insert(t.object);
  }
  for (const auto& p : s.plans) {
    if (p.action.empty() || p.topic.empty()) throw ValidationError(where + ": plan step with empty field");
    if (!p.null_topic() && !entities.contains(p.topic)) {
      throw ValidationError(where + ": plan topic '" + p.topic + "' not grounded in knowledge");
    }
  }
  for (std::size_t i = 1; i < s.turns.size(); ++i) {
    if (s.turns[i].role == s.turns[i - 1].role) {
      throw ValidationError(where + ": roles do not alternate at turn " + std::to_string(i));
    }
  }
  for (const auto& t : s.turns) {
    if (t.goal_index && (*t.goal_index < 0 || static_cast<std::size_t>(*t.goal_index) >= s.plans.size())) {
      throw ValidationError(where + ": goal_index " + std::to_string(*t.goal_index) + " out of range");
    }
  }
}

std::vector<std::optional<int>> turn_goals(const DialogueSample& s) {
  std::vector<std::optional<int>> out(s.turns.size());
  bool any_explicit = false;
  std::size_t system_turns = 0;
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    out[i] = s.turns[i].goal_index;
    any_explicit = any_explicit || out[i].has_value();
    if (s.turns[i].role == Role::System) ++system_turns;
  }
  if (!any_explicit && system_turns == s.plans.size()) {
    int next = 0;
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      if (s.turns[i].role == Role::System) out[i] = next++;
    }
  }
  return out;
}

std::optional<std::size_t> target_step_index(const DialogueSample& s) {
  if (!s.target) return std::nullopt;
  for (std::size_t i = s.plans.size(); i > 0; --i) {
    if (s.plans[i - 1] == *s.target) return i - 1;
  }
  return std::nullopt;
}

}  // namespace tcplan::corpus
