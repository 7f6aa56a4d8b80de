#include <cmath>

#include "doctest.h"
#include "support/tiny.hpp"
#include "tcplan/encoders/encoders.hpp"
#include "tcplan/error.hpp"
#include "tcplan/planner/model.hpp"
#include "tcplan/rng.hpp"

using namespace tcplan;
using namespace tcplan::encoders;
using corpus::TokenizerMode;
using tensorlab::Tensor;
namespace special = corpus::special;

namespace {

const std::vector<KnowledgeTriple> kFive = {
    {"Andy Lau", "stars in", "McDull, Prince de la Bun"},
    {"Andy Lau", "birthday", "1961-9-27"},
    {"McDull, Prince de la Bun", "rating", "8.1"},
    {"Jacky Cheung", "sings", "Kiss Goodbye"},
    {"McDull, Prince de la Bun", "type", "animation"},
};

int count(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<int>(std::count(v.begin(), v.end(), s));
}

}  // namespace

TEST_SUITE("encoders") {
  TEST_CASE("knowledge linearization") {
    // Hand count: Andy Lau group 2 + (1+2+5) + (1+1+1) = 13; McDull group
    // 5 + 3 + 3 = 11; Jacky Cheung group 2 + (1+1+2) = 6.
    const Linearization lin = linearize_knowledge(kFive, TokenizerMode::Whitespace, 256);
    CHECK(lin.tokens.size() == 30);
    CHECK(lin.pairs == 5);
    CHECK(lin.dropped_pairs == 0);
    CHECK(count(lin.tokens, "Andy") == 1);
    CHECK(count(lin.tokens, "[SEP]") == 5);
    CHECK(count(lin.tokens, "McDull,") == 2);  // subject once, object once
    CHECK(lin.tokens.front() == "Andy");
    CHECK(lin.positions[13] == 0);  // McDull group restarts
    CHECK(lin.positions[24] == 0);  // Jacky Cheung group
    CHECK(lin.positions[29] == 5);

    auto dup = kFive;
    dup.push_back(kFive[1]);
    CHECK(linearize_knowledge(dup, TokenizerMode::Whitespace, 256).tokens == lin.tokens);

    const Linearization cut = linearize_knowledge(kFive, TokenizerMode::Whitespace, 26);
    CHECK(cut.tokens.size() == 24);
    CHECK(cut.dropped_pairs == 1);
    const Linearization cut2 = linearize_knowledge(kFive, TokenizerMode::Whitespace, 20);
    CHECK(cut2.tokens.size() == 13);
    CHECK(cut2.dropped_pairs == 3);

    CHECK(linearize_knowledge({}, TokenizerMode::Whitespace, 10).tokens.empty());
  }

  TEST_CASE("history tokens") {
    const std::vector<corpus::Turn> turns{{corpus::Role::User, "hello there", {}},
                                          {corpus::Role::System, "hi", {}},
                                          {corpus::Role::User, "a b c d e f g", {}}};
    CHECK(history_tokens(turns, 0, TokenizerMode::Whitespace, 16) == std::vector<std::string>{"[CLS]"});
    const auto two = history_tokens(turns, 2, TokenizerMode::Whitespace, 16);
    CHECK(two == std::vector<std::string>{"[CLS]", "u:", "hello", "there", "[SEP]", "s:", "hi", "[SEP]"});
    std::size_t dropped = 0;
    const auto cut = history_tokens(turns, 3, TokenizerMode::Whitespace, 8, &dropped);
    CHECK(cut.size() == 8);
    CHECK(cut.front() == "[CLS]");
    CHECK(cut.back() == "[SEP]");
    CHECK(cut[1] == "b");
    CHECK(dropped == 9);
  }

  TEST_CASE("shapes of encoder outputs") {
    const auto v = tiny::vocab();
    const auto cfg = tiny::config(v.size());
    const auto w = planner::init_weights(cfg, 3);
    Graph g;
    const Var q = g.constant(Tensor(1, cfg.d, 0.1));

    ProfileIds one{{{v.id("name")}}, {{v.id("ann")}}};
    CHECK(encode_profile(g, w, cfg, one, q).rows() == 1);

    ProfileIds twins{{{v.id("name")}, {v.id("name")}}, {{v.id("ann")}, {v.id("ann")}}};
    const Tensor U = encode_profile(g, w, cfg, twins, q).value();
    for (std::size_t j = 0; j < cfg.d; ++j) CHECK(U(0, j) == U(1, j));

    ProfileIds three{{{v.id("name")}, {v.id("favorite"), v.id("star")}, {v.id("likes")}},
                     {{v.id("ann")}, {v.id("s1")}, {v.id("food"), v.id("f1")}}};
    Tensor probs;
    encode_profile(g, w, cfg, three, q, nullptr, &probs);
    REQUIRE(probs.cols() == 3);
    CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0).epsilon(1e-12));

    KeyMask empty_mask;
    CHECK(encode_profile(g, w, cfg, ProfileIds{}, q, &empty_mask).rows() == 0);
    CHECK(empty_mask.empty());

    const EncodedKnowledge k = encode_knowledge(g, w, cfg, {}, {});
    CHECK(k.K.rows() == 0);
    CHECK(k.K.cols() == cfg.d);

    const std::vector<int> cls{special::kCls};
    CHECK(encode_history(g, w, cfg, cls).rows() == 1);
    std::vector<int> full(cfg.history_budget, v.id("hi"));
    CHECK(encode_history(g, w, cfg, full).rows() == cfg.history_budget);
    full.push_back(v.id("hi"));
    CHECK_THROWS_AS(encode_history(g, w, cfg, full), TruncationError);
  }

  TEST_CASE("masked positions get zero attention") {
    const auto v = tiny::vocab();
    const std::vector<int> ids{special::kCls, v.id("hi"), special::kPad, v.id("yes"), special::kPad};
    Graph g;
    Rng rng(5);
    Tensor qt(3, 4), kt(5, 4);
    for (double& x : qt.values()) x = rng.normal(0, 1);
    for (double& x : kt.values()) x = rng.normal(0, 1);
    const Var q = g.leaf(qt), k = g.leaf(kt);
    tensorlab::AttentionSpec spec;
    spec.key_mask = mask_from_ids(ids);
    Tensor probs;
    tensorlab::attention(q, k, k, spec, std::nullopt, &probs);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(probs(i, 2) == 0.0);
      CHECK(probs(i, 4) == 0.0);
      CHECK(probs(i, 0) + probs(i, 1) + probs(i, 3) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("no gradient reaches padded positions") {
    const auto v = tiny::vocab();
    const auto cfg = tiny::config(v.size());
    planner::Model model{cfg, v, planner::init_weights(cfg, 11)};
    EncoderInput in;
    in.profile = {{{v.id("name")}, {special::kPad}}, {{v.id("ann")}, {special::kPad}}};
    in.knowledge = {v.id("m1"), special::kPad, special::kSep, v.id("star"), v.id("s1"), special::kPad};
    in.knowledge_pos = {0, 1, 2, 3, 4, 5};
    in.history = {special::kCls, v.id("u:"), special::kPad, v.id("hello"), special::kPad, special::kSep};
    in.prefix = {special::kBos, v.id("rec"), special::kSep, v.id("m1"), special::kSep};
    const planner::Example ex = planner::make_example(model, in, planner::PlanPath{{{"rec", "m1"}, {"chat", "s1"}}});

    Graph g;
    const auto ctx = encode(g, model.weights, cfg, ex.input);
    const Var loss = planner::example_loss(g, model, ex, ctx);
    g.backward(loss);
    const Tensor& grad = g.grad(g.param(model.weights.at("emb.tok")));
    double pad_abs = 0.0, other_abs = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) {
      pad_abs += std::abs(grad(special::kPad, j));
      other_abs += std::abs(grad(static_cast<std::size_t>(v.id("hello")), j));
    }
    CHECK(pad_abs == 0.0);
    CHECK(other_abs > 0.0);
  }

  TEST_CASE("reordering subjects permutes knowledge rows") {
    const auto v = tiny::vocab();
    const auto cfg = tiny::config(v.size());
    const auto w = planner::init_weights(cfg, 4);
    const std::vector<KnowledgeTriple> a{{"m1", "star", "s1"}, {"m2", "star", "s2"}, {"f1", "likes", "ann"}};
    const std::vector<KnowledgeTriple> b{a[2], a[0], a[1]};
    const auto la = linearize_knowledge(a, TokenizerMode::Whitespace, 32);
    const auto lb = linearize_knowledge(b, TokenizerMode::Whitespace, 32);
    Graph g;
    const Tensor Ka = encode_knowledge(g, w, cfg, v.encode(la.tokens), la.positions).K.value();
    const Tensor Kb = encode_knowledge(g, w, cfg, v.encode(lb.tokens), lb.positions).K.value();
    // Each group is 4 tokens: rows of b are [group 2, group 0, group 1] of a.
    const std::size_t map[3] = {2, 0, 1};
    for (std::size_t grp = 0; grp < 3; ++grp)
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < cfg.d; ++j)
          CHECK(std::abs(Kb(grp * 4 + r, j) - Ka(map[grp] * 4 + r, j)) < 1e-12);
  }

  TEST_CASE("finite outputs across 1000 seeds") {
    const auto v = tiny::vocab();
    const auto cfg = tiny::config(v.size());
    bool all_finite = true;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto w = planner::init_weights(cfg, seed);
      Rng rng(seed + 17);
      auto token = [&] { return static_cast<int>(9 + rng.below(v.size() - 9)); };
      EncoderInput in;
      const std::size_t m = 1 + rng.below(3);
      for (std::size_t i = 0; i < m; ++i) {
        in.profile.keys.push_back({token()});
        in.profile.values.push_back({token(), token()});
      }
      const std::size_t k = rng.below(20);
      for (std::size_t i = 0; i < k; ++i) {
        in.knowledge.push_back(token());
        in.knowledge_pos.push_back(static_cast<int>(i));
      }
      in.history.push_back(special::kCls);
      for (std::size_t i = 0, n = rng.below(15); i < n; ++i) in.history.push_back(token());
      in.prefix = {special::kBos, token(), special::kSep, token(), special::kSep};
      Graph g(false);
      const EncodedContext ctx = encode(g, w, cfg, in);
      for (const Var& x : {ctx.U, ctx.K, ctx.H, ctx.T}) all_finite = all_finite && x.value().all_finite();
    }
    CHECK(all_finite);
  }
}
