#include "tcplan/planner/layers.hpp"

#include <cmath>

namespace tcplan::planner {

using namespace tensorlab;

void add_attention_weights(Weights& w, const std::string& prefix, std::size_t d) {
  for (const char* p : {"q", "k", "v", "o"}) {
    w.add(prefix + ".w" + p, d, d);
    // Key bias would only shift every logit of a row by the same amount.
    if (*p != 'k') w.add(prefix + ".b" + p, 1, d);
  }
}

void add_ffn_weights(Weights& w, const std::string& prefix, std::size_t d, std::size_t d_ff) {
  w.add(prefix + ".w1", d, d_ff);
  w.add(prefix + ".b1", 1, d_ff);
  w.add(prefix + ".w2", d_ff, d);
  w.add(prefix + ".b2", 1, d);
}

void add_norm_weights(Weights& w, const std::string& prefix, std::size_t d) {
  w.add(prefix + ".gain", 1, d, 1.0);
  w.add(prefix + ".bias", 1, d);
}

Var multi_head(Graph& g, const Weights& w, const std::string& prefix, Var query, Var memory,
               const AttentionSpec& spec, std::optional<Var> col_weight) {
  const Var q = linear(query, param(g, w, prefix + ".wq"), param(g, w, prefix + ".bq"));
  const Var k = matmul(memory, param(g, w, prefix + ".wk"));
  const Var v = linear(memory, param(g, w, prefix + ".wv"), param(g, w, prefix + ".bv"));
  const Var a = attention(q, k, v, spec, col_weight);
  return linear(a, param(g, w, prefix + ".wo"), param(g, w, prefix + ".bo"));
}

Var feed_forward(Graph& g, const Weights& w, const std::string& prefix, Var x) {
  const Var h = gelu(linear(x, param(g, w, prefix + ".w1"), param(g, w, prefix + ".b1")));
  return linear(h, param(g, w, prefix + ".w2"), param(g, w, prefix + ".b2"));
}

Var add_norm(Graph& g, const Weights& w, const std::string& prefix, Var x, Var sublayer) {
  return layer_norm(add(x, sublayer), param(g, w, prefix + ".gain"), param(g, w, prefix + ".bias"));
}

Var encoder_layer(Graph& g, const Weights& w, const std::string& prefix, Var x, std::size_t heads,
                  const KeyMask& mask) {
  AttentionSpec spec;
  spec.heads = heads;
  spec.scale = 1.0 / std::sqrt(static_cast<double>(x.cols() / heads));
  spec.key_mask = mask;
  const Var a = add_norm(g, w, prefix + ".ln1", x, multi_head(g, w, prefix + ".attn", x, x, spec));
  return add_norm(g, w, prefix + ".ln2", a, feed_forward(g, w, prefix + ".ffn", a));
}

}  // namespace tcplan::planner
