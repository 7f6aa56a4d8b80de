#include <cmath>

#include "doctest.h"
#include "support/metric_oracles.hpp"
#include "tcplan/error.hpp"
#include "tcplan/metrics/metrics.hpp"
#include "tcplan/rng.hpp"

using namespace tcplan;
using namespace tcplan::metrics;

namespace {

Tokens toks(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Tokens random_tokens(Rng& rng, std::size_t max_len) {
  static const char* words[] = {"a", "b", "c", "d", "e"};
  Tokens t(rng.below(max_len + 1));
  for (auto& w : t) w = words[rng.below(5)];
  return t;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("plan accuracy") {
    const PlanStep x{"rec", "x"}, y{"chat", "NULL"}, z{"chat", "z"};
    auto perfect = plan_accuracy({x, y}, {{std::nullopt, x, y}, {x, y, std::nullopt}});
    CHECK(perfect.acc_action == 1.0);
    CHECK(perfect.bi_acc_topic == 1.0);

    // First instance matches only its following label, second its current.
    const auto mixed = plan_accuracy({y, z}, {{std::nullopt, x, y}, {y, z, std::nullopt}});
    CHECK(mixed.acc_action == 0.5);
    CHECK(mixed.acc_topic == 0.5);
    CHECK(mixed.bi_acc_action == 1.0);
    CHECK(mixed.bi_acc_topic == 1.0);

    // Action and topic scored independently.
    const auto split = plan_accuracy({PlanStep{"rec", "other"}}, {{std::nullopt, x, std::nullopt}});
    CHECK(split.acc_action == 1.0);
    CHECK(split.acc_topic == 0.0);

    CHECK_THROWS_AS(plan_accuracy({}, {}), InputError);
    CHECK_THROWS_AS(plan_accuracy({x}, {}), InputError);
  }

  TEST_CASE("Bi-Acc never below Acc") {
    Rng rng(1);
    const std::vector<PlanStep> steps{{"a", "x"}, {"a", "y"}, {"b", "x"}, {"b", "NULL"}};
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<PlanStep> pred;
      std::vector<GoldWindow> gold;
      for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) {
        pred.push_back(steps[rng.below(4)]);
        GoldWindow w;
        w.current = steps[rng.below(4)];
        if (rng.bernoulli(0.5)) w.prev = steps[rng.below(4)];
        if (rng.bernoulli(0.5)) w.next = steps[rng.below(4)];
        gold.push_back(w);
      }
      const auto a = plan_accuracy(pred, gold);
      CHECK(a.bi_acc_action >= a.acc_action);
      CHECK(a.bi_acc_topic >= a.acc_topic);
      CHECK(a.bi_acc_topic <= 1.0);
    }
  }

  TEST_CASE("text metric examples") {
    CHECK(word_f1(toks("a b"), toks("a c")) == 0.5);
    CHECK(word_f1({}, toks("a")) == 0.0);
    CHECK(bleu(toks("x y z w"), toks("x y z w"), 1) == 1.0);
    CHECK(bleu(toks("x y z w"), toks("x y z w"), 2) == 1.0);
    CHECK(dist({toks("a a b")}, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // "a b c" vs "a b d": p1 = 2/3, p2 = 1/2, equal lengths.
    CHECK(bleu(toks("a b c"), toks("a b d"), 2) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));
    // No shared bigram: 0 unsmoothed, positive smoothed.
    CHECK(bleu(toks("a c"), toks("a b"), 2) == 0.0);
    CHECK(bleu(toks("a c"), toks("a b"), 2, true) > 0.0);
    // Brevity penalty on a short candidate.
    CHECK(bleu(toks("a"), toks("a b"), 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(bleu({}, toks("a"), 1) == 0.0);
    CHECK(dist({}, 2) == 0.0);
  }

  TEST_CASE("text metrics match brute-force oracles on random inputs") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const Tokens c = random_tokens(rng, 7), r = random_tokens(rng, 7);
      CHECK(std::abs(word_f1(c, r) - oracle::word_f1(c, r)) <= 1e-9);
      for (int n = 1; n <= 4; ++n) {
        CHECK(std::abs(bleu(c, r, n) - oracle::bleu(c, r, n, false)) <= 1e-9);
        CHECK(std::abs(bleu(c, r, n, true) - oracle::bleu(c, r, n, true)) <= 1e-9);
      }
      std::vector<Tokens> corpus;
      for (std::size_t i = 0, k = rng.below(5); i < k; ++i) corpus.push_back(random_tokens(rng, 6));
      for (int n = 1; n <= 3; ++n) {
        CHECK(std::abs(dist(corpus, n) - oracle::dist(corpus, n)) <= 1e-9);
        auto shuffled = corpus;
        rng.shuffle(shuffled);
        CHECK(dist(shuffled, n) == dist(corpus, n));
      }
    }
  }

  TEST_CASE("knowledge F1") {
    const std::vector<KnowledgeTriple> t{{"Andy Lau", "stars in", "McDull"}, {"McDull", "rated", "8.2"}};
    CHECK(knowledge_f1({"Andy Lau in McDull"}, {"McDull by Andy Lau"}, {t}) == 1.0);
    CHECK(knowledge_f1({"nothing here"}, {"McDull by Andy Lau"}, {t}) == 0.0);
    // gold {Andy Lau, McDull, 8.2}; candidate {Andy Lau, McDull, Hot Pot}.
    const std::vector<KnowledgeTriple> t3{{"Andy Lau", "stars in", "McDull"}, {"McDull", "rated", "8.2"},
                                          {"Hot Pot", "in", "Chengdu"}};
    CHECK(knowledge_f1({"Andy Lau McDull Hot Pot"}, {"Andy Lau McDull 8.2"}, {t3}) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(knowledge_f1({"a"}, {}, {t}), InputError);
  }

  TEST_CASE("target success") {
    CHECK(target_success({"try X now", "Y is good"}, {"X", "Y"}) == 1.0);
    CHECK(target_success({"no", "no"}, {"X", "Y"}) == 0.0);
    CHECK(*target_success({"X!", "Y?", "nope"}, {"X", "Y", "Z"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(!target_success({}, {}).has_value());
  }

  TEST_CASE("report omits absent metrics") {
    MetricReport r;
    r.set("target_success", std::nullopt);
    r.set("acc_action", 0.5);
    const json j = r.to_json();
    CHECK(j["report_version"] == kReportVersion);
    CHECK(!j.contains("target_success"));
    CHECK(j["acc_action"] == 0.5);
  }
}
