#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tcplan/corpus/instances.hpp"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/encoders/encoders.hpp"
#include "tcplan/planner/config.hpp"
#include "tcplan/planner/plan_path.hpp"
#include "tcplan/planner/weights.hpp"

namespace tcplan::planner {

using encoders::EncodedContext;
using encoders::EncoderInput;
using tensorlab::AttentionSpec;

struct Model {
  PlannerConfig config;
  corpus::Vocab vocab;
  Weights weights;
};

// Every parameter of encoders and decoder, zero-filled (layer-norm gains 1).
Weights weight_layout(const PlannerConfig& cfg);
// normal(0, 0.02) for matrices and embeddings, zero biases, unit gains;
// values rounded to float.
Weights init_weights(const PlannerConfig& cfg, std::uint64_t seed);
// Sets cfg.vocab_size from the vocabulary.
Model init_model(PlannerConfig cfg, corpus::Vocab vocab, std::uint64_t seed);

// mean over the target axis of K T^T / sqrt(d): one weight per K row (k x 1).
Var knowledge_target_weight(Var K, Var T);

// softmax(P K^T * scale, columns scaled by w, masked) K.
Var mutual_cross_attention(Var P_k, Var K, Var w, const AttentionSpec& spec);
// The same kernel without the column weight.
Var cross_attention(Var P, Var K, const AttentionSpec& spec);

struct Fused {
  Var out;   // p x d
  Var gate;  // p x 1
};

// g = sigmoid([A_x ; A_y] W + b) per row; out = g A_x + (1 - g) A_y.
Fused gated_fuse(Var A_x, Var A_y, Var W, Var b);

// Gate values of every decoder layer, for inspection.
struct ForwardTrace {
  std::vector<Tensor> beta;
  std::vector<Tensor> gamma;
  Tensor knowledge_weight;
};

// Decoder logits (len x V) for decoder input ids beginning with the target
// prefix. Raises TruncationError past max_decoder_len.
Var forward(Graph& g, const Model& model, const EncodedContext& ctx, std::span<const int> decoder_ids,
            ForwardTrace* trace = nullptr);

inline constexpr int kIgnoreLabel = -100;

// Teacher-forced decoder input and next-token labels; prefix positions other
// than the last are ignored.
struct Example {
  EncoderInput input;
  std::vector<int> decoder_ids;
  std::vector<int> labels;
  std::size_t plan_tokens() const;
};

std::vector<int> plan_ids(const Model& model, const PlanPath& path);
Example make_example(const Model& model, const EncoderInput& input, const PlanPath& label);
Example make_example(const Model& model, const corpus::Instance& instance);

// Mean cross-entropy over plan positions.
Var example_loss(Graph& g, const Model& model, const Example& ex, const EncodedContext& ctx);

// Teacher-forced logits without recording a tape.
Tensor example_logits(const Model& model, const Example& ex);

struct Decoded {
  std::vector<int> ids;  // generated ids, [EOS] included when reached
  std::vector<std::string> tokens;
  bool finished = false;  // stopped at [EOS]
};

// Argmax decoding from the target prefix; ties go to the lowest id.
Decoded greedy_decode(const Model& model, const EncoderInput& input);

}  // namespace tcplan::planner
