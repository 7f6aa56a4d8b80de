#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tcplan/tensorlab/graph.hpp"

namespace tcplan::tensorlab {

enum class Axis { Rows = 0, Cols = 1 };

// 1 = attendable, 0 = masked. Empty mask means every key is valid.
using KeyMask = std::vector<std::uint8_t>;

// ---- linear algebra ----
Var matmul(Var a, Var b);     // [p x q] . [q x r]
Var matmul_nt(Var a, Var b);  // a . b^T
Var transpose(Var a);
Var linear(Var x, Var weight, Var bias);  // x W + b, b is 1 x r

// ---- elementwise ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_bias(Var x, Var bias);  // bias 1 x c broadcast over rows
Var sigmoid(Var x);
Var gelu(Var x);
Var relu(Var x);

// ---- shape ----
Var concat(Var a, Var b, Axis axis);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

// ---- reductions ----
Var sum(Var x);                     // 1 x 1
Var mean_pool(Var x, Axis axis);    // Rows -> 1 x c, Cols -> r x 1
Var masked_mean_rows(Var x, const KeyMask& mask);  // 1 x c over valid rows

// ---- normalization / probabilities ----
Var softmax_rows(Var x);
Var masked_softmax_rows(Var x, const KeyMask& key_mask, bool causal = false);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// ---- lookup / loss ----
Var embed(Var table, std::span<const int> ids);
inline constexpr int kNoIgnore = -1;
// Mean over positions whose label != ignore_index.
Var cross_entropy(Var logits, std::span<const int> labels, int ignore_index = kNoIgnore);

// ---- gating ----
Var scale_cols(Var x, Var col_weight);           // x[:, j] * w[j], w is k x 1
Var mul_col(Var x, Var g);                       // x[i, :] * g[i], g is p x 1
Var gate_mix(Var a, Var b, Var gate);            // g*a + (1-g)*b row-wise, g is p x 1

// ---- attention ----
struct AttentionSpec {
  std::size_t heads = 1;
  double scale = 1.0;
  bool causal = false;
  KeyMask key_mask;  // length = keys rows, empty = all valid
};

// Multi-head scaled dot-product attention over column-split heads:
//   logits_h = scale * Q_h K_h^T, optionally multiplied column-wise by
//   col_weight (k x 1), masked, row-softmaxed, then applied to V_h.
// Rows whose keys are all masked produce zero output.
// When probs_out is given, head 0 probabilities are copied into it.
Var attention(Var q, Var k, Var v, const AttentionSpec& spec,
              std::optional<Var> col_weight = std::nullopt, Tensor* probs_out = nullptr);

}  // namespace tcplan::tensorlab
