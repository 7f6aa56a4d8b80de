#pragma once

#include <span>
#include <string>
#include <vector>

#include "tcplan/corpus/types.hpp"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/planner/config.hpp"
#include "tcplan/planner/layers.hpp"
#include "tcplan/planner/weights.hpp"

namespace tcplan::encoders {

using corpus::KnowledgeTriple;
using planner::PlannerConfig;
using planner::Weights;
using tensorlab::Graph;
using tensorlab::KeyMask;
using tensorlab::Tensor;
using tensorlab::Var;

struct Linearization {
  std::vector<std::string> tokens;
  std::vector<int> positions;     // offset within the token's subject group
  std::size_t pairs = 0;          // (relation, object) pairs emitted
  std::size_t dropped_pairs = 0;  // pairs cut to respect the budget
};

// Per unique subject (first-appearance order): subject tokens, then for each
// unique (relation, object) under it: [SEP] relation tokens object tokens.
// Over budget, whole pairs are dropped from the end. Positions restart at
// every subject, so reordering subjects permutes the encoded rows.
Linearization linearize_knowledge(const std::vector<KnowledgeTriple>& triples, corpus::TokenizerMode mode,
                                  std::size_t budget);

// "[CLS] u: ... [SEP] s: ... [SEP]" over turns[0, end), truncated from the
// oldest side; [CLS] is always kept.
std::vector<std::string> history_tokens(const std::vector<corpus::Turn>& turns, std::size_t end,
                                        corpus::TokenizerMode mode, std::size_t budget,
                                        std::size_t* dropped = nullptr);

struct ProfileIds {
  std::vector<std::vector<int>> keys;
  std::vector<std::vector<int>> values;
};

// Token ids for one planning problem. [PAD] ids are masked everywhere.
struct EncoderInput {
  ProfileIds profile;
  std::vector<int> knowledge;
  std::vector<int> knowledge_pos;
  std::vector<int> history;
  std::vector<int> prefix;  // [BOS] action [SEP] topic [SEP]
  std::size_t dropped_pairs = 0;
};

EncoderInput make_encoder_input(const corpus::DialogueSample& sample, std::size_t turn,
                                const corpus::PlanStep& target, const corpus::Vocab& vocab,
                                const PlannerConfig& cfg);

struct EncodedKnowledge {
  Var K;
  KeyMask mask;
};

struct EncodedContext {
  Var U, K, H, T;
  KeyMask u_mask, k_mask, h_mask;
};

// Registers the shared embedding tables and the encoder stacks.
void add_encoder_weights(Weights& w, const PlannerConfig& cfg);

KeyMask mask_from_ids(std::span<const int> ids);

EncodedKnowledge encode_knowledge(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> ids,
                                  std::span<const int> positions);
Var encode_history(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> ids,
                   KeyMask* mask_out = nullptr);
// Key-value memory network. Each hop attends from the query over the entry
// keys (key + value embeddings), reads the values and adds the read to the
// query; u_i = value_i + final query.
Var encode_profile(Graph& g, const Weights& w, const PlannerConfig& cfg, const ProfileIds& profile, Var query,
                   KeyMask* mask_out = nullptr, Tensor* attention_out = nullptr);
// Decoder token + position embeddings of the target prefix.
Var encode_target(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> prefix);

// Memory-network query: mean of the unmasked history rows.
Var profile_query(Var H, const KeyMask& h_mask);

EncodedContext encode(Graph& g, const Weights& w, const PlannerConfig& cfg, const EncoderInput& input,
                      const EncodedKnowledge* cached_knowledge = nullptr);

}  // namespace tcplan::encoders
