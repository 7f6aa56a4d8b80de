#pragma once

#include <string>
#include <vector>

#include "tcplan/corpus/vocab.hpp"
#include "tcplan/planner/config.hpp"
#include "tcplan/planner/model.hpp"
#include "tcplan/rng.hpp"
#include "tcplan/tensorlab/grad_check.hpp"

namespace tiny {

inline tcplan::corpus::Vocab vocab() {
  std::vector<std::string> tokens;
  for (auto t : tcplan::corpus::special::kTokens) tokens.emplace_back(t);
  for (const char* w : {"u:", "s:", "chat", "rec", "movie", "star", "m1", "m2", "s1", "s2", "name", "ann", "likes",
                        "hello", "hi", "yes", "no", "about", "favorite", "food", "f1"})
    tokens.emplace_back(w);
  return tcplan::corpus::Vocab(tokens);
}

inline tcplan::planner::PlannerConfig config(std::size_t vocab_size) {
  tcplan::planner::PlannerConfig c;
  c.vocab_size = vocab_size;
  c.d = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_plan_len = 12;
  c.max_prefix_len = 8;
  c.history_budget = 16;
  c.knowledge_budget = 32;
  return c;
}

inline tcplan::planner::Model model(std::uint64_t seed,
                                   tcplan::planner::BranchMode branches = tcplan::planner::BranchMode::Parallel,
                                   tcplan::planner::MutualAttention mutual = tcplan::planner::MutualAttention::On) {
  auto v = vocab();
  auto cfg = config(v.size());
  cfg.branches = branches;
  cfg.mutual = mutual;
  return tcplan::planner::init_model(cfg, v, seed);
}

// Adds N(0, sd) noise to every weight, biases and gains included.
inline void jitter(tcplan::planner::Weights& w, std::uint64_t seed, double sd) {
  tcplan::Rng rng(seed);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (double& v : w.tensor(i).values()) v += rng.normal(0.0, sd);
}

inline tcplan::encoders::EncoderInput input(const tcplan::corpus::Vocab& v) {
  namespace special = tcplan::corpus::special;
  tcplan::encoders::EncoderInput in;
  in.profile = {{{v.id("name")}, {v.id("favorite"), v.id("star")}}, {{v.id("ann")}, {v.id("s1")}}};
  in.knowledge = {v.id("m1"), special::kSep, v.id("star"), v.id("s1"), special::kSep, v.id("likes"), v.id("f1")};
  in.knowledge_pos = {0, 1, 2, 3, 4, 5, 6};
  in.history = {special::kCls, v.id("u:"), v.id("hello"), special::kSep, v.id("s:"), v.id("hi"), special::kSep};
  in.prefix = {special::kBos, v.id("rec"), special::kSep, v.id("m1"), special::kSep};
  return in;
}

// Gradient check of the whole planner loss (encoders included) on a
// three-token plan "[A] chat [T]", every parameter perturbed.
inline tcplan::tensorlab::GradCheckReport full_grad_check(tcplan::planner::BranchMode mode) {
  using namespace tcplan;
  namespace special = corpus::special;
  planner::Model m = model(8, mode);
  jitter(m.weights, 80, 0.4);
  planner::Example ex;
  ex.input = input(m.vocab);
  ex.decoder_ids = ex.input.prefix;
  ex.decoder_ids.push_back(special::kAction);
  ex.decoder_ids.push_back(m.vocab.id("chat"));
  const int ig = planner::kIgnoreLabel;
  ex.labels = {ig, ig, ig, ig, special::kAction, m.vocab.id("chat"), special::kTopic};

  std::vector<tensorlab::NamedTensor> params;
  for (std::size_t i = 0; i < m.weights.size(); ++i) params.push_back({m.weights.name(i), m.weights.tensor(i)});
  const auto objective = [&](tensorlab::Graph& g, std::span<const tensorlab::Var> vars) {
    for (std::size_t i = 0; i < vars.size(); ++i) g.alias_param(m.weights.tensor(i), vars[i]);
    const auto ctx = encoders::encode(g, m.weights, m.config, ex.input);
    return planner::example_loss(g, m, ex, ctx);
  };
  return tensorlab::grad_check(objective, params, 1e-4);
}

}  // namespace tiny
