#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "tcplan/corpus/instances.hpp"
#include "tcplan/corpus/jsonl.hpp"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"
#include "tcplan/synthgen/synthgen.hpp"

using namespace tcplan;
using namespace tcplan::synthgen;

namespace {

int index_of(const World& w, const std::string& name) {
  for (std::size_t i = 0; i < w.topics.size(); ++i)
    if (w.topics[i].name == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("determinism") {
    const World w = build_world(WorldSpec{});
    CHECK(corpus::serialize_sample(generate_one(w, 0)) == corpus::serialize_sample(generate_one(w, 0)));
    const auto a = generate(WorldSpec{}, 50);
    const auto b = generate(WorldSpec{}, 50);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(corpus::serialize_sample(a[i]) == corpus::serialize_sample(b[i]));
    WorldSpec other;
    other.seed = 2;
    CHECK(corpus::serialize_sample(generate(other, 1)[0]) != corpus::serialize_sample(a[0]));
  }

  TEST_CASE("world structure") {
    const World w = build_world(WorldSpec{});
    CHECK(w.topics.size() == 60);
    CHECK(w.stars.size() == 12);
    CHECK(w.openings.size() == 5);
    for (std::size_t i = 0; i < w.topics.size(); ++i) {
      CHECK(!shortest_path(w, 0, static_cast<int>(i)).empty());
      for (auto t : corpus::special::kTokens) CHECK(w.topics[i].name != t);
    }
    const auto table = default_templates(w);
    std::set<std::string> actions{"greeting"};
    for (int t = 0; t < 5; ++t) actions.insert(chat_action(static_cast<TopicType>(t)));
    for (int t = 1; t < 5; ++t) actions.insert(recommendation_action(static_cast<TopicType>(t)));
    for (const auto& o : w.openings) actions.insert(o);
    CHECK(actions.size() == 15);
    for (const auto& a : actions) CHECK(table.covers(a));

    WorldSpec bad;
    bad.n_actions = 16;
    CHECK_THROWS_AS(build_world(bad), ConfigError);
  }

  TEST_CASE("one hundred samples pass validation") {
    const auto samples = generate(WorldSpec{}, 100);
    CHECK(samples.size() == 100);
    for (const auto& s : samples) {
      CHECK_NOTHROW(corpus::parse_record(corpus::serialize_sample(s), corpus::SchemaMode::Canonical));
    }
  }

  TEST_CASE("path statistics over 1000 samples") {
    const WorldSpec spec;
    const World w = build_world(spec);
    const auto samples = generate(spec, 1000);
    double steps = 0.0;
    std::size_t max_turns = 0;
    double turns = 0.0;
    for (const auto& s : samples) {
      steps += static_cast<double>(s.plans.size());
      turns += static_cast<double>(s.turns.size());
      max_turns = std::max(max_turns, s.turns.size());
      // create_target never takes the error path and lands on the final step.
      const auto t = corpus::create_target(s);
      CHECK(*t.target == s.plans.back());
      // The plan is the rule output: a perfect planner exists.
      CHECK(rule_plan(w, s.profile, index_of(w, s.plans.back().topic)) == s.plans);
      // Consecutive steps are distinct transitions.
      for (std::size_t i = 1; i < s.plans.size(); ++i) CHECK(!(s.plans[i] == s.plans[i - 1]));
    }
    steps /= 1000.0;
    turns /= 1000.0;
    MESSAGE("mean steps " << steps << ", mean turns " << turns);
    CHECK(steps >= 4.0);
    CHECK(steps <= 5.0);
    CHECK(max_turns <= 14);
    CHECK(turns >= 5.9);
    CHECK(turns <= 9.9);
  }

  TEST_CASE("knowledge layout") {
    const auto samples = generate(WorldSpec{}, 200);
    for (const auto& s : samples) {
      std::set<std::string> path_topics;
      for (const auto& p : s.plans)
        if (!p.null_topic()) path_topics.insert(p.topic);
      std::size_t path_edges = 0, distractors = 0;
      for (const auto& k : s.knowledge) {
        const bool subj = path_topics.count(k.subject) > 0;
        const bool obj = path_topics.count(k.object) > 0;
        if (subj && obj) ++path_edges;
        else if (!subj && !obj) ++distractors;
        else CHECK(subj);  // attribute triple hangs off a path topic
      }
      CHECK(path_edges == path_topics.size() - 1);
      CHECK(distractors <= 3 * path_edges);
      // Every system turn that realizes a topic mentions it.
      for (const auto& t : s.turns) {
        if (t.role != corpus::Role::System) continue;
        const auto& step = s.plans[*t.goal_index];
        if (!step.null_topic()) CHECK(t.utterance.find(step.topic) != std::string::npos);
      }
    }
  }

  TEST_CASE("splits") {
    const auto samples = generate(WorldSpec{}, 100);
    const auto sp = make_splits(samples, 1);
    CHECK(sp.train.size() == 80);
    CHECK(sp.dev.size() == 10);
    CHECK(sp.test.size() == 10);
    std::set<std::string> all(sp.train.begin(), sp.train.end());
    all.insert(sp.dev.begin(), sp.dev.end());
    all.insert(sp.test.begin(), sp.test.end());
    CHECK(all.size() == 100);
    CHECK(make_splits(samples, 1).dev == sp.dev);
  }
}
