#include "tcplan/planner/model.hpp"

#include <algorithm>
#include <cmath>

#include "tcplan/error.hpp"
#include "tcplan/planner/layers.hpp"
#include "tcplan/rng.hpp"

namespace tcplan::planner {

using namespace tensorlab;
namespace special = corpus::special;

namespace {

const char* const kBranches[3] = {"k", "u", "h"};

std::string layer_name(std::size_t l) { return "dec.l" + std::to_string(l); }

// An empty or fully masked source contributes zero rows.
bool has_keys(Var memory, const KeyMask& mask) {
  if (memory.rows() == 0) return false;
  return mask.empty() || std::find(mask.begin(), mask.end(), 1) != mask.end();
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Weights weight_layout(const PlannerConfig& cfg) {
  cfg.validate();
  Weights w;
  encoders::add_encoder_weights(w, cfg);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    add_attention_weights(w, p + ".self", cfg.d);
    add_norm_weights(w, p + ".ln_self", cfg.d);
    if (cfg.branches == BranchMode::Parallel) {
      for (const char* b : kBranches) {
        add_attention_weights(w, p + ".branch_" + b, cfg.d);
        add_norm_weights(w, p + ".ln_branch_" + b, cfg.d);
      }
    }
    for (const char* b : kBranches) add_attention_weights(w, p + ".cross_" + b, cfg.d);
    w.add(p + ".gate1.w", 2 * cfg.d, 1);
    w.add(p + ".gate1.b", 1, 1);
    w.add(p + ".gate2.w", 2 * cfg.d, 1);
    w.add(p + ".gate2.b", 1, 1);
    add_norm_weights(w, p + ".ln_fuse", cfg.d);
    add_ffn_weights(w, p + ".ffn", cfg.d, cfg.d_ff);
    add_norm_weights(w, p + ".ln_ffn", cfg.d);
  }
  w.add("out.w", cfg.d, cfg.vocab_size);
  w.add("out.b", 1, cfg.vocab_size);
  return w;
}

Weights init_weights(const PlannerConfig& cfg, std::uint64_t seed) {
  Weights w = weight_layout(cfg);
  Rng rng(seed);
  for (std::size_t i = 0; i < w.size(); ++i) {
    Tensor& t = w.tensor(i);
    if (t.rows() == 1) {
      t.fill(ends_with(w.name(i), ".gain") ? 1.0 : 0.0);
      continue;
    }
    for (double& v : t.values()) v = rng.normal(0.0, 0.02);
  }
  w.round_to_float();
  return w;
}

Model init_model(PlannerConfig cfg, corpus::Vocab vocab, std::uint64_t seed) {
  cfg.vocab_size = vocab.size();
  Weights w = init_weights(cfg, seed);
  return Model{cfg, std::move(vocab), std::move(w)};
}

Var knowledge_target_weight(Var K, Var T) {
  const double s = 1.0 / std::sqrt(static_cast<double>(K.cols()));
  return mean_pool(scale(matmul_nt(K, T), s), Axis::Cols);
}

Var mutual_cross_attention(Var P_k, Var K, Var w, const AttentionSpec& spec) { return attention(P_k, K, K, spec, w); }

Var cross_attention(Var P, Var K, const AttentionSpec& spec) { return attention(P, K, K, spec); }

Fused gated_fuse(Var A_x, Var A_y, Var W, Var b) {
  const Var gate = sigmoid(add_bias(matmul(concat(A_x, A_y, Axis::Cols), W), b));
  return {gate_mix(A_x, A_y, gate), gate};
}

Var forward(Graph& g, const Model& model, const EncodedContext& ctx, std::span<const int> decoder_ids,
            ForwardTrace* trace) {
  const PlannerConfig& cfg = model.config;
  const Weights& w = model.weights;
  const std::size_t len = decoder_ids.size();
  if (len > cfg.max_decoder_len())
    throw TruncationError("decoder sequence of " + std::to_string(len) + " tokens exceeds " +
                          std::to_string(cfg.max_decoder_len()));
  if (len == 0) throw DimensionError("forward: empty decoder input");
  std::vector<int> pos(len);
  for (std::size_t i = 0; i < len; ++i) pos[i] = static_cast<int>(i);
  Var x = add(embed(param(g, w, "emb.tok"), decoder_ids), embed(param(g, w, "emb.pos.dec"), pos));

  Var kw = cfg.mutual == MutualAttention::On
               ? knowledge_target_weight(ctx.K, ctx.T)
               : g.constant(Tensor(ctx.K.rows(), 1, 1.0));
  if (trace != nullptr) trace->knowledge_weight = kw.value();

  const double sc = 1.0 / std::sqrt(static_cast<double>(cfg.d / cfg.n_heads));
  AttentionSpec causal;
  causal.heads = cfg.n_heads;
  causal.scale = sc;
  causal.causal = true;
  AttentionSpec to_k{cfg.n_heads, sc, false, ctx.k_mask};
  AttentionSpec to_u{cfg.n_heads, sc, false, ctx.u_mask};
  AttentionSpec to_h{cfg.n_heads, sc, false, ctx.h_mask};

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_name(l);
    const Var x1 = add_norm(g, w, p + ".ln_self", x, multi_head(g, w, p + ".self", x, x, causal));
    Var branch[3] = {x1, x1, x1};
    if (cfg.branches == BranchMode::Parallel) {
      for (int b = 0; b < 3; ++b) {
        const std::string name = kBranches[b];
        branch[b] = add_norm(g, w, p + ".ln_branch_" + name, x1,
                             multi_head(g, w, p + ".branch_" + name, x1, x1, causal));
      }
    }
    const Var a_k = has_keys(ctx.K, ctx.k_mask)
                        ? multi_head(g, w, p + ".cross_k", branch[0], ctx.K, to_k, kw)
                        : g.constant(Tensor(len, cfg.d));
    const Var a_u = has_keys(ctx.U, ctx.u_mask) ? multi_head(g, w, p + ".cross_u", branch[1], ctx.U, to_u)
                                                : g.constant(Tensor(len, cfg.d));
    const Var a_h = has_keys(ctx.H, ctx.h_mask) ? multi_head(g, w, p + ".cross_h", branch[2], ctx.H, to_h)
                                                : g.constant(Tensor(len, cfg.d));
    const Fused f1 = gated_fuse(a_u, a_h, param(g, w, p + ".gate1.w"), param(g, w, p + ".gate1.b"));
    const Fused f2 = gated_fuse(a_k, f1.out, param(g, w, p + ".gate2.w"), param(g, w, p + ".gate2.b"));
    if (trace != nullptr) {
      trace->beta.push_back(f1.gate.value());
      trace->gamma.push_back(f2.gate.value());
    }
    const Var x2 = add_norm(g, w, p + ".ln_fuse", x1, f2.out);
    x = add_norm(g, w, p + ".ln_ffn", x2, feed_forward(g, w, p + ".ffn", x2));
  }
  return linear(x, param(g, w, "out.w"), param(g, w, "out.b"));
}

std::size_t Example::plan_tokens() const {
  std::size_t n = 0;
  for (int l : labels) n += l != kIgnoreLabel ? 1 : 0;
  return n;
}

std::vector<int> plan_ids(const Model& model, const PlanPath& path) {
  return model.vocab.encode(serialize_plan(path, model.config.tokenizer));
}

Example make_example(const Model& model, const EncoderInput& input, const PlanPath& label) {
  const std::vector<int> plan = plan_ids(model, label);
  if (plan.size() > model.config.max_plan_len)
    throw TruncationError("plan of " + std::to_string(plan.size()) + " tokens exceeds max_plan_len");
  Example ex;
  ex.input = input;
  ex.decoder_ids = input.prefix;
  ex.decoder_ids.insert(ex.decoder_ids.end(), plan.begin(), plan.end() - 1);
  ex.labels.assign(input.prefix.size() - 1, kIgnoreLabel);
  ex.labels.insert(ex.labels.end(), plan.begin(), plan.end());
  return ex;
}

Example make_example(const Model& model, const corpus::Instance& instance) {
  const EncoderInput input =
      encoders::make_encoder_input(*instance.sample, instance.turn, instance.target, model.vocab, model.config);
  return make_example(model, input, PlanPath{instance.label});
}

Var example_loss(Graph& g, const Model& model, const Example& ex, const EncodedContext& ctx) {
  return cross_entropy(forward(g, model, ctx, ex.decoder_ids), ex.labels, kIgnoreLabel);
}

Tensor example_logits(const Model& model, const Example& ex) {
  Graph g(false);
  const EncodedContext ctx = encoders::encode(g, model.weights, model.config, ex.input);
  return forward(g, model, ctx, ex.decoder_ids).value();
}

Decoded greedy_decode(const Model& model, const EncoderInput& input) {
  Graph g(false);
  const EncodedContext ctx = encoders::encode(g, model.weights, model.config, input);
  std::vector<int> seq = input.prefix;
  Decoded out;
  while (out.ids.size() < model.config.max_plan_len) {
    const Tensor& logits = forward(g, model, ctx, seq).value();
    const auto last = logits.row_span(logits.rows() - 1);
    int best = 0;
    for (std::size_t j = 1; j < last.size(); ++j)
      if (last[j] > last[best]) best = static_cast<int>(j);
    out.ids.push_back(best);
    out.tokens.push_back(model.vocab.token(best));
    if (best == special::kEos) {
      out.finished = true;
      break;
    }
    seq.push_back(best);
  }
  return out;
}

}  // namespace tcplan::planner
