#include "tcplan/corpus/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "tcplan/error.hpp"

namespace tcplan::corpus {

Vocab::Vocab() {
  for (auto t : special::kTokens) add(std::string(t));
}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  if (tokens.size() < special::kTokens.size()) throw SchemaError("vocabulary shorter than the reserved block");
  for (std::size_t i = 0; i < special::kTokens.size(); ++i) {
    if (tokens[i] != special::kTokens[i]) {
      throw SchemaError("vocabulary id " + std::to_string(i) + " must be " + std::string(special::kTokens[i]));
    }
  }
  for (const auto& t : tokens) {
    if (ids_.contains(t)) throw SchemaError("duplicate vocabulary token '" + t + "'");
    add(t);
  }
}

void Vocab::add(std::string token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(tokens);
}

std::vector<std::string> topic_tokens(std::string_view topic, TokenizerMode mode) {
  if (topic == kNullTopic) return {std::string(special::kTokens[special::kNull])};
  return tokenize(topic, mode);
}

Vocab build_vocab(const std::vector<DialogueSample>& samples, TokenizerMode mode, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  auto count = [&](std::string_view text) {
    for (auto& t : tokenize(text, mode)) ++counts[t];
  };
  for (const auto& s : samples) {
    for (const auto& e : s.profile.entries) {
      count(e.key);
      count(e.value);
    }
    for (const auto& t : s.knowledge) {
      count(t.subject);
      count(t.relation);
      count(t.object);
    }
    for (const auto& t : s.turns) {
      ++counts[std::string(t.role == Role::User ? kUserMarker : kSystemMarker)];
      count(t.utterance);
    }
    for (const auto& p : s.plans) {
      count(p.action);
      if (!p.null_topic()) count(p.topic);
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_count) continue;
    if (std::find(special::kTokens.begin(), special::kTokens.end(), tok) != special::kTokens.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  std::vector<std::string> tokens(special::kTokens.begin(), special::kTokens.end());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocab(tokens);
}

}  // namespace tcplan::corpus
