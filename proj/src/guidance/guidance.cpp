#include "tcplan/guidance/guidance.hpp"

#include <cstdint>
#include <fstream>

#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"

namespace tcplan::guidance {

bool ChitChatActions::matches(std::string_view action) const {
  for (const auto& s : substrings) {
    if (action.find(s) != std::string_view::npos) return true;
  }
  return false;
}

PlanStep select_prompt(const planner::PlanPath& path) {
  if (path.steps.empty()) throw GuidanceError("select_prompt: empty plan path");
  return path.steps.back();
}

PromptChoice choose_prompt(const std::vector<std::string>& decoded, const PlanStep& target,
                           corpus::TokenizerMode mode, FallbackPolicy policy) {
  PromptChoice choice;
  try {
    choice.path = planner::parse_plan(decoded, mode);
    choice.parsed = true;
  } catch (const planner::ParseError& e) {
    choice.path = e.prefix();
    choice.note = e.what();
  }
  if (!choice.path.steps.empty()) {
    choice.step = select_prompt(choice.path);
    return choice;
  }
  choice.fallback = true;
  choice.step = policy == FallbackPolicy::Target ? target : kNeutralStep;
  return choice;
}

std::vector<KnowledgeTriple> extract_knowledge(std::string_view topic, std::string_view action,
                                               const std::vector<KnowledgeTriple>& triples,
                                               const ExtractOptions& opts) {
  std::vector<KnowledgeTriple> out;
  const std::string center = corpus::normalize_space(topic);
  if (center == corpus::kNullTopic || center.empty() || opts.chit_chat.matches(action)) return out;
  for (const auto& t : triples) {
    if (corpus::normalize_space(t.subject) == center ||
        (opts.include_object_matches && corpus::normalize_space(t.object) == center)) {
      out.push_back(t);
    }
  }
  return out;
}

std::string build_generation_input(const corpus::UserProfile& profile, const std::vector<KnowledgeTriple>& extracted,
                                   const std::vector<corpus::Turn>& history, std::string_view action) {
  auto section = [](std::string& out, std::string_view tag, const std::string& body) {
    if (!out.empty()) out.push_back(' ');
    out += tag;
    if (!body.empty()) {
      out.push_back(' ');
      out += body;
    }
  };
  std::string prof, know, hist;
  for (const auto& e : profile.entries) {
    if (!prof.empty()) prof += " | ";
    prof += e.key + ": " + e.value;
  }
  for (const auto& t : extracted) {
    if (!know.empty()) know += " | ";
    know += t.subject + " " + t.relation + " " + t.object;
  }
  for (const auto& t : history) {
    if (!hist.empty()) hist.push_back(' ');
    hist += std::string(t.role == corpus::Role::User ? corpus::kUserMarker : corpus::kSystemMarker) + " " +
            t.utterance;
  }
  std::string out;
  section(out, "[PROFILE]", prof);
  section(out, "[KNOWLEDGE]", know);
  section(out, "[HISTORY]", hist);
  section(out, "[ACTION]", std::string(action));
  return out;
}

void TemplateTable::add(std::string action, std::string tmpl) { table_[std::move(action)].push_back(std::move(tmpl)); }

bool TemplateTable::covers(std::string_view action) const { return table_.find(action) != table_.end(); }

const std::vector<std::string>& TemplateTable::variants(std::string_view action) const {
  auto it = table_.find(action);
  if (it == table_.end()) throw RealizationError("no template for action '" + std::string(action) + "'");
  return it->second;
}

TemplateTable TemplateTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open template table " + path.string());
  TemplateTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected action<TAB>template");
    }
    t.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return t;
}

void TemplateTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write template table " + path.string());
  for (const auto& [action, variants] : table_)
    for (const auto& v : variants) out << action << '\t' << v << '\n';
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::string realize(std::string_view input, const PlanStep& prompt, const std::vector<KnowledgeTriple>& extracted,
                    const TemplateTable& templates) {
  const auto& variants = templates.variants(prompt.action);
  std::string out = variants[fnv1a(input) % variants.size()];
  const bool has_topic = !prompt.null_topic();
  replace_all(out, "{topic}", has_topic ? prompt.topic : "");
  replace_all(out, "{relation}", extracted.empty() ? "" : extracted.front().relation);
  replace_all(out, "{object}", extracted.empty() ? "" : extracted.front().object);
  out = corpus::normalize_space(out);
  if (has_topic && out.find(prompt.topic) == std::string::npos) {
    if (!out.empty()) out.push_back(' ');
    out += prompt.topic;
  }
  return out;
}

}  // namespace tcplan::guidance
