#pragma once

#include <string>
#include <vector>

#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/corpus/types.hpp"
#include "tcplan/error.hpp"

namespace tcplan::planner {

// Steps in reverse-chronological order: index 0 is the target end of the
// conversation, the last element is the step for the current turn.
struct PlanPath {
  std::vector<corpus::PlanStep> steps;
  friend bool operator==(const PlanPath&, const PlanPath&) = default;
};

// "[A] action-tokens [T] topic-tokens ... [EOS]"
std::vector<std::string> serialize_plan(const PlanPath& path, corpus::TokenizerMode mode);

class ParseError : public Error {
 public:
  ParseError(const std::string& what, PlanPath prefix, std::size_t position)
      : Error(ErrorClass::Runtime, what), prefix_(std::move(prefix)), position_(position) {}
  // Steps that parsed completely before the violation.
  const PlanPath& prefix() const noexcept { return prefix_; }
  std::size_t position() const noexcept { return position_; }

 private:
  PlanPath prefix_;
  std::size_t position_;
};

// Grammar: ([A] action+ [T] topic+)+ [EOS]. Token runs are joined back into
// strings; unknown strings are kept verbatim.
PlanPath parse_plan(const std::vector<std::string>& tokens, corpus::TokenizerMode mode);

std::string join_plan_tokens(const std::vector<std::string>& tokens);

}  // namespace tcplan::planner
