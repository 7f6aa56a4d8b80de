#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/corpus/types.hpp"

namespace tcplan::corpus {

namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kCls = 5;
inline constexpr int kAction = 6;
inline constexpr int kTopic = 7;
inline constexpr int kNull = 8;
inline constexpr std::array<std::string_view, 9> kTokens = {"[PAD]", "[UNK]", "[BOS]", "[EOS]", "[SEP]",
                                                          "[CLS]", "[A]",   "[T]",   "[NULL]"};
}  // namespace special

// Role markers prefixed to history turns.
inline constexpr std::string_view kUserMarker = "u:";
inline constexpr std::string_view kSystemMarker = "s:";

// Bijective token <-> id map. Reserved tokens hold ids 0-8.
class Vocab {
 public:
  Vocab();
  explicit Vocab(const std::vector<std::string>& tokens);  // validates reserved prefix

  int id(std::string_view token) const;  // [UNK] when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Topic tokens; the NULL topic maps to the [NULL] token.
std::vector<std::string> topic_tokens(std::string_view topic, TokenizerMode mode);

// Counts every token of profiles, knowledge, utterances and plans; ordering is
// frequency descending, then lexicographic.
Vocab build_vocab(const std::vector<DialogueSample>& samples, TokenizerMode mode, std::size_t min_count = 1);

}  // namespace tcplan::corpus
