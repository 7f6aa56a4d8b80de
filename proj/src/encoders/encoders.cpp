#include "tcplan/encoders/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "tcplan/corpus/instances.hpp"
#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/error.hpp"

namespace tcplan::encoders {

using namespace tensorlab;
using planner::param;
namespace special = corpus::special;

Linearization linearize_knowledge(const std::vector<KnowledgeTriple>& triples, corpus::TokenizerMode mode,
                                  std::size_t budget) {
  struct Group {
    std::string subject;
    std::vector<std::pair<std::string, std::string>> pairs;
  };
  std::vector<Group> groups;
  for (const auto& t : triples) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.subject == t.subject; });
    if (it == groups.end()) {
      groups.push_back({t.subject, {}});
      it = groups.end() - 1;
    }
    const std::pair<std::string, std::string> pair{t.relation, t.object};
    if (std::find(it->pairs.begin(), it->pairs.end(), pair) == it->pairs.end()) it->pairs.push_back(pair);
  }

  struct Piece {
    std::size_t group;
    std::vector<std::string> tokens;
  };
  std::vector<std::vector<std::string>> heads;
  std::vector<Piece> pieces;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    heads.push_back(corpus::tokenize(groups[gi].subject, mode));
    for (const auto& [rel, obj] : groups[gi].pairs) {
      Piece p{gi, {std::string(special::kTokens[special::kSep])}};
      for (auto& tok : corpus::tokenize(rel, mode)) p.tokens.push_back(std::move(tok));
      for (auto& tok : corpus::tokenize(obj, mode)) p.tokens.push_back(std::move(tok));
      pieces.push_back(std::move(p));
    }
  }
  auto length = [&](std::size_t n_pieces) {
    std::size_t len = 0;
    std::size_t last_group = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < n_pieces; ++i) {
      if (pieces[i].group != last_group) {
        len += heads[pieces[i].group].size();
        last_group = pieces[i].group;
      }
      len += pieces[i].tokens.size();
    }
    return len;
  };
  std::size_t kept = pieces.size();
  while (kept > 0 && length(kept) > budget) --kept;

  Linearization out;
  out.pairs = kept;
  out.dropped_pairs = pieces.size() - kept;
  std::size_t last_group = static_cast<std::size_t>(-1);
  int offset = 0;
  for (std::size_t i = 0; i < kept; ++i) {
    if (pieces[i].group != last_group) {
      offset = 0;
      for (const auto& tok : heads[pieces[i].group]) {
        out.tokens.push_back(tok);
        out.positions.push_back(offset++);
      }
      last_group = pieces[i].group;
    }
    for (const auto& tok : pieces[i].tokens) {
      out.tokens.push_back(tok);
      out.positions.push_back(offset++);
    }
  }
  return out;
}

std::vector<std::string> history_tokens(const std::vector<corpus::Turn>& turns, std::size_t end,
                                        corpus::TokenizerMode mode, std::size_t budget, std::size_t* dropped) {
  if (budget == 0) throw TruncationError("history budget must be at least 1");
  std::vector<std::string> body;
  for (std::size_t i = 0; i < std::min(end, turns.size()); ++i) {
    body.emplace_back(turns[i].role == corpus::Role::User ? corpus::kUserMarker : corpus::kSystemMarker);
    for (auto& tok : corpus::tokenize(turns[i].utterance, mode)) body.push_back(std::move(tok));
    body.emplace_back(special::kTokens[special::kSep]);
  }
  const std::size_t keep = std::min(body.size(), budget - 1);
  if (dropped != nullptr) *dropped = body.size() - keep;
  std::vector<std::string> out{std::string(special::kTokens[special::kCls])};
  out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(keep), body.end());
  return out;
}

EncoderInput make_encoder_input(const corpus::DialogueSample& sample, std::size_t turn,
                                const corpus::PlanStep& target, const corpus::Vocab& vocab,
                                const PlannerConfig& cfg) {
  EncoderInput in;
  for (const auto& e : sample.profile.entries) {
    in.profile.keys.push_back(vocab.encode(corpus::tokenize(e.key, cfg.tokenizer)));
    in.profile.values.push_back(vocab.encode(corpus::tokenize(e.value, cfg.tokenizer)));
  }
  const Linearization lin = linearize_knowledge(sample.knowledge, cfg.tokenizer, cfg.knowledge_budget);
  in.knowledge = vocab.encode(lin.tokens);
  in.knowledge_pos = lin.positions;
  in.dropped_pairs = lin.dropped_pairs;
  in.history = vocab.encode(history_tokens(sample.turns, turn, cfg.tokenizer, cfg.history_budget));
  in.prefix = vocab.encode(corpus::decoder_prefix(target, cfg.tokenizer));
  if (in.prefix.size() > cfg.max_prefix_len)
    throw TruncationError("target prefix of " + std::to_string(in.prefix.size()) + " tokens exceeds max_prefix_len");
  return in;
}

void add_encoder_weights(Weights& w, const PlannerConfig& cfg) {
  w.add("emb.tok", cfg.vocab_size, cfg.d);
  w.add("emb.pos.dec", cfg.max_decoder_len(), cfg.d);
  w.add("emb.pos.hist", cfg.history_budget, cfg.d);
  w.add("emb.pos.know", cfg.knowledge_budget, cfg.d);
  for (const char* stack : {"enc.know", "enc.hist"}) {
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
      const std::string p = std::string(stack) + ".l" + std::to_string(l);
      planner::add_attention_weights(w, p + ".attn", cfg.d);
      planner::add_norm_weights(w, p + ".ln1", cfg.d);
      planner::add_ffn_weights(w, p + ".ffn", cfg.d, cfg.d_ff);
      planner::add_norm_weights(w, p + ".ln2", cfg.d);
    }
  }
}

KeyMask mask_from_ids(std::span<const int> ids) {
  KeyMask m(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != special::kPad ? 1 : 0;
  return m;
}

namespace {

std::vector<int> position_ids(std::size_t n, bool from_end) {
  std::vector<int> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<int>(from_end ? n - 1 - i : i);
  return p;
}

Var encoder_stack(Graph& g, const Weights& w, const PlannerConfig& cfg, const std::string& stack, Var x,
                  const KeyMask& mask) {
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l)
    x = planner::encoder_layer(g, w, stack + ".l" + std::to_string(l), x, cfg.n_heads, mask);
  return x;
}

// Averages token embeddings per row group: one matmul against a constant
// selection matrix.
Var pooled_embeddings(Graph& g, Var table, const std::vector<std::vector<int>>& groups) {
  std::vector<int> flat;
  for (const auto& grp : groups) flat.insert(flat.end(), grp.begin(), grp.end());
  Tensor select(groups.size(), flat.size());
  std::size_t col = 0;
  for (std::size_t r = 0; r < groups.size(); ++r) {
    for (std::size_t j = 0; j < groups[r].size(); ++j) select(r, col + j) = 1.0 / static_cast<double>(groups[r].size());
    col += groups[r].size();
  }
  return matmul(g.constant(std::move(select)), embed(table, flat));
}

}  // namespace

EncodedKnowledge encode_knowledge(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> ids,
                                  std::span<const int> positions) {
  if (ids.size() > cfg.knowledge_budget) throw TruncationError("knowledge sequence exceeds budget");
  if (positions.size() != ids.size()) throw DimensionError("knowledge ids and positions differ in length");
  EncodedKnowledge out;
  out.mask = mask_from_ids(ids);
  if (ids.empty()) {
    out.K = g.constant(Tensor(0, cfg.d));
    return out;
  }
  const Var x = add(embed(param(g, w, "emb.tok"), ids), embed(param(g, w, "emb.pos.know"), positions));
  out.K = encoder_stack(g, w, cfg, "enc.know", x, out.mask);
  return out;
}

Var encode_history(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> ids, KeyMask* mask_out) {
  if (ids.size() > cfg.history_budget) throw TruncationError("history sequence exceeds budget");
  const KeyMask mask = mask_from_ids(ids);
  if (mask_out != nullptr) *mask_out = mask;
  if (ids.empty()) return g.constant(Tensor(0, cfg.d));
  const auto pos = position_ids(ids.size(), true);
  const Var x = add(embed(param(g, w, "emb.tok"), ids), embed(param(g, w, "emb.pos.hist"), pos));
  return encoder_stack(g, w, cfg, "enc.hist", x, mask);
}

Var encode_profile(Graph& g, const Weights& w, const PlannerConfig& cfg, const ProfileIds& profile, Var query,
                   KeyMask* mask_out, Tensor* attention_out) {
  if (profile.keys.size() != profile.values.size()) throw DimensionError("profile keys and values differ in count");
  const std::size_t m = profile.keys.size();
  KeyMask mask(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    const auto is_pad = [](int id) { return id == special::kPad; };
    if (std::all_of(profile.keys[i].begin(), profile.keys[i].end(), is_pad) &&
        std::all_of(profile.values[i].begin(), profile.values[i].end(), is_pad))
      mask[i] = 0;
    if (profile.keys[i].empty() || profile.values[i].empty())
      throw DimensionError("profile entry " + std::to_string(i) + " has no tokens");
  }
  if (mask_out != nullptr) *mask_out = mask;
  if (m == 0) return g.constant(Tensor(0, cfg.d));
  const Var table = param(g, w, "emb.tok");
  const Var keys = pooled_embeddings(g, table, profile.keys);
  const Var values = pooled_embeddings(g, table, profile.values);
  const Var slots = add(keys, values);
  AttentionSpec spec;
  spec.scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  spec.key_mask = mask;
  Var q = query;
  for (std::size_t hop = 0; hop < cfg.profile_hops; ++hop) {
    const bool last = hop + 1 == cfg.profile_hops;
    q = add(q, attention(q, slots, values, spec, std::nullopt, last ? attention_out : nullptr));
  }
  return add_bias(values, q);
}

Var encode_target(Graph& g, const Weights& w, const PlannerConfig& cfg, std::span<const int> prefix) {
  if (prefix.size() > cfg.max_decoder_len()) throw TruncationError("target prefix exceeds decoder length");
  const auto pos = position_ids(prefix.size(), false);
  return add(embed(param(g, w, "emb.tok"), prefix), embed(param(g, w, "emb.pos.dec"), pos));
}

Var profile_query(Var H, const KeyMask& h_mask) { return masked_mean_rows(H, h_mask); }

EncodedContext encode(Graph& g, const Weights& w, const PlannerConfig& cfg, const EncoderInput& input,
                      const EncodedKnowledge* cached_knowledge) {
  EncodedContext ctx;
  if (cached_knowledge != nullptr) {
    ctx.K = cached_knowledge->K;
    ctx.k_mask = cached_knowledge->mask;
  } else {
    EncodedKnowledge k = encode_knowledge(g, w, cfg, input.knowledge, input.knowledge_pos);
    ctx.K = k.K;
    ctx.k_mask = std::move(k.mask);
  }
  ctx.H = encode_history(g, w, cfg, input.history, &ctx.h_mask);
  const Var query = ctx.H.rows() > 0 ? profile_query(ctx.H, ctx.h_mask) : g.constant(Tensor(1, cfg.d));
  ctx.U = encode_profile(g, w, cfg, input.profile, query, &ctx.u_mask);
  ctx.T = encode_target(g, w, cfg, input.prefix);
  return ctx;
}

}  // namespace tcplan::encoders
