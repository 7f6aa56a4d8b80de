#include "tcplan/corpus/tokenizer.hpp"

#include <cctype>

#include "tcplan/error.hpp"

namespace tcplan::corpus {

TokenizerMode parse_tokenizer_mode(const std::string& name) {
  if (name == "char") return TokenizerMode::Char;
  if (name == "whitespace") return TokenizerMode::Whitespace;
  throw ConfigError("unknown tokenizer mode '" + name + "' (expected char or whitespace)");
}

std::string_view tokenizer_mode_name(TokenizerMode mode) {
  return mode == TokenizerMode::Char ? "char" : "whitespace";
}

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: keep it as its own token
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode) {
  std::vector<std::string> out;
  if (mode == TokenizerMode::Whitespace) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j > i) out.emplace_back(text.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    if (lead < 0x80 && std::isspace(lead)) {
      ++i;
      continue;
    }
    std::size_t n = utf8_length(lead);
    if (i + n > text.size()) n = text.size() - i;
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, TokenizerMode mode) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && mode == TokenizerMode::Whitespace) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace tcplan::corpus
