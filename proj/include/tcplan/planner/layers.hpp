#pragma once

#include <optional>
#include <string>

#include "tcplan/planner/weights.hpp"
#include "tcplan/tensorlab/ops.hpp"

namespace tcplan::planner {

using tensorlab::Graph;
using tensorlab::KeyMask;
using tensorlab::Var;

inline Var param(Graph& g, const Weights& w, const std::string& name) { return g.param(w.at(name)); }

// Registers <prefix>.{wq,bq,wk,wv,bv,wo,bo}; keys carry no bias.
void add_attention_weights(Weights& w, const std::string& prefix, std::size_t d);
// <prefix>.{w1,b1,w2,b2}
void add_ffn_weights(Weights& w, const std::string& prefix, std::size_t d, std::size_t d_ff);
// <prefix>.{gain,bias}
void add_norm_weights(Weights& w, const std::string& prefix, std::size_t d);

// Projected multi-head attention from `query` rows to `memory` rows.
Var multi_head(Graph& g, const Weights& w, const std::string& prefix, Var query, Var memory,
               const tensorlab::AttentionSpec& spec, std::optional<Var> col_weight = std::nullopt);
Var feed_forward(Graph& g, const Weights& w, const std::string& prefix, Var x);
Var add_norm(Graph& g, const Weights& w, const std::string& prefix, Var x, Var sublayer);

// Post-norm transformer encoder layer with full self-attention.
Var encoder_layer(Graph& g, const Weights& w, const std::string& prefix, Var x, std::size_t heads,
                  const KeyMask& mask);

}  // namespace tcplan::planner
