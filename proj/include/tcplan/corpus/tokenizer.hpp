#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tcplan::corpus {

enum class TokenizerMode { Char, Whitespace };

TokenizerMode parse_tokenizer_mode(const std::string& name);
std::string_view tokenizer_mode_name(TokenizerMode mode);

// Char mode yields one token per non-space UTF-8 code point; whitespace mode
// splits on runs of spaces.
std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode);

// Inverse of tokenize for strings in canonical (normalize_space) form.
std::string join_tokens(const std::vector<std::string>& tokens, TokenizerMode mode);

}  // namespace tcplan::corpus
