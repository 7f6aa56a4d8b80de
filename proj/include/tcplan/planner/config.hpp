#pragma once

#include <cstddef>
#include <string>

#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/json_fields.hpp"

namespace tcplan::planner {

// Diagnostic toggle for the knowledge-target weight: On uses the computed
// weight, Ones substitutes an all-ones weight through the same kernel.
enum class MutualAttention { On, Ones };

// Parallel: three masked self-attention branches produce P_k, P_u, P_h.
// Shared: the layer's single self-attention output feeds all three.
enum class BranchMode { Parallel, Shared };

struct PlannerConfig {
  std::size_t vocab_size = 0;
  std::size_t d = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 128;
  std::size_t encoder_layers = 1;
  std::size_t max_plan_len = 64;  // generated tokens, [EOS] included
  std::size_t max_prefix_len = 24;
  std::size_t history_budget = 128;
  std::size_t knowledge_budget = 256;
  std::size_t profile_hops = 1;
  MutualAttention mutual = MutualAttention::On;
  BranchMode branches = BranchMode::Parallel;
  corpus::TokenizerMode tokenizer = corpus::TokenizerMode::Whitespace;

  std::size_t max_decoder_len() const { return max_prefix_len + max_plan_len; }

  // Throws ConfigError.
  void validate() const;

  static PlannerConfig desk_scale();
  static PlannerConfig paper_scale();
};

std::string mutual_attention_name(MutualAttention m);
MutualAttention parse_mutual_attention(const std::string& s);
std::string branch_mode_name(BranchMode b);
BranchMode parse_branch_mode(const std::string& s);

json config_to_json(const PlannerConfig& cfg);
// Fields absent from `j` keep their value in `base`. Does not validate.
PlannerConfig config_from_json(const json& j, PlannerConfig base = {});

}  // namespace tcplan::planner
