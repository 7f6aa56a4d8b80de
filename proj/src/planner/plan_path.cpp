#include "tcplan/planner/plan_path.hpp"

#include "tcplan/corpus/vocab.hpp"

namespace tcplan::planner {

namespace {

using corpus::special::kTokens;

const std::string& tok(int id) {
  static const std::vector<std::string> names(kTokens.begin(), kTokens.end());
  return names[static_cast<std::size_t>(id)];
}

bool is_control(const std::string& t) {
  for (int id : {corpus::special::kPad, corpus::special::kBos, corpus::special::kEos, corpus::special::kSep,
                 corpus::special::kCls, corpus::special::kAction, corpus::special::kTopic}) {
    if (t == tok(id)) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> serialize_plan(const PlanPath& path, corpus::TokenizerMode mode) {
  std::vector<std::string> out;
  for (const auto& step : path.steps) {
    out.push_back(tok(corpus::special::kAction));
    for (auto& t : corpus::tokenize(step.action, mode)) out.push_back(std::move(t));
    out.push_back(tok(corpus::special::kTopic));
    for (auto& t : corpus::topic_tokens(step.topic, mode)) out.push_back(std::move(t));
  }
  out.push_back(tok(corpus::special::kEos));
  return out;
}

PlanPath parse_plan(const std::vector<std::string>& tokens, corpus::TokenizerMode mode) {
  const std::string& A = tok(corpus::special::kAction);
  const std::string& T = tok(corpus::special::kTopic);
  const std::string& EOS = tok(corpus::special::kEos);
  const std::string& NUL = tok(corpus::special::kNull);

  PlanPath path;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("plan parse error at token " + std::to_string(i) + ": " + why, path, i);
  };
  while (true) {
    if (i >= tokens.size()) throw fail("missing [EOS]");
    if (tokens[i] == EOS) {
      if (path.steps.empty()) throw fail("empty plan");
      if (i + 1 != tokens.size()) {
        ++i;
        throw fail("tokens after [EOS]");
      }
      return path;
    }
    if (tokens[i] != A) throw fail("expected [A], got '" + tokens[i] + "'");
    ++i;
    std::vector<std::string> action;
    while (i < tokens.size() && tokens[i] != T && !is_control(tokens[i])) {
      if (tokens[i] == NUL) throw fail("[NULL] inside an action");
      action.push_back(tokens[i++]);
    }
    if (action.empty()) throw fail("empty action");
    if (i >= tokens.size() || tokens[i] != T) throw fail("expected [T]");
    ++i;
    std::vector<std::string> topic;
    while (i < tokens.size() && !is_control(tokens[i])) topic.push_back(tokens[i++]);
    if (topic.empty()) throw fail("empty topic");
    std::string topic_str;
    if (topic.size() == 1 && topic[0] == NUL) {
      topic_str = std::string(corpus::kNullTopic);
    } else {
      for (const auto& t : topic)
        if (t == NUL) throw fail("[NULL] mixed with topic tokens");
      topic_str = corpus::join_tokens(topic, mode);
    }
    path.steps.push_back({corpus::join_tokens(action, mode), std::move(topic_str)});
  }
}

std::string join_plan_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace tcplan::planner
