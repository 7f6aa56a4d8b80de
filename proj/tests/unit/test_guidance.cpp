#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tcplan/error.hpp"
#include "tcplan/guidance/guidance.hpp"

using namespace tcplan;
using namespace tcplan::guidance;
using corpus::Role;
using corpus::TokenizerMode;
using planner::PlanPath;

namespace {

const std::filesystem::path kFixtures = TCPLAN_FIXTURE_DIR;

std::vector<KnowledgeTriple> andy_triples() {
  return {{"Andy Lau", "birthday", "1961-9-27"},
          {"McDull, Prince de la Bun", "stars", "Andy Lau"},
          {"Andy Lau", "stars in", "McDull, Prince de la Bun"},
          {"Days of Being Wild", "director", "Wong Kar-wai"},
          {"Jacky Cheung", "sings", "Kiss Goodbye"}};
}

}  // namespace

TEST_SUITE("guidance") {
  TEST_CASE("select_prompt takes the last step") {
    CHECK(select_prompt(PlanPath{{{"rec", "x"}}}) == PlanStep{"rec", "x"});
    CHECK(select_prompt(PlanPath{{{"rec", "x"}, {"chat", "NULL"}}}) == PlanStep{"chat", "NULL"});
    CHECK_THROWS_AS(select_prompt(PlanPath{}), GuidanceError);
  }

  TEST_CASE("choose_prompt fallbacks") {
    const PlanStep target{"movie recommendation", "m1"};
    const auto ok = choose_prompt({"[A]", "chat", "[T]", "s1", "[A]", "greeting", "[T]", "[NULL]", "[EOS]"}, target,
                                  TokenizerMode::Whitespace, FallbackPolicy::Target);
    CHECK(ok.parsed);
    CHECK(!ok.fallback);
    CHECK(ok.step == PlanStep{"greeting", "NULL"});

    // Truncated tail: the complete prefix is used.
    const auto partial = choose_prompt({"[A]", "chat", "[T]", "s1", "[A]", "greeting"}, target,
                                       TokenizerMode::Whitespace, FallbackPolicy::Target);
    CHECK(!partial.parsed);
    CHECK(!partial.fallback);
    CHECK(partial.step == PlanStep{"chat", "s1"});

    const std::vector<std::string> junk{"s1", "s1", "s1"};
    const auto t = choose_prompt(junk, target, TokenizerMode::Whitespace, FallbackPolicy::Target);
    CHECK(t.fallback);
    CHECK(t.step == target);
    CHECK(!t.note.empty());
    const auto n = choose_prompt(junk, target, TokenizerMode::Whitespace, FallbackPolicy::Neutral);
    CHECK(n.fallback);
    CHECK(n.step.null_topic());
  }

  TEST_CASE("extract_knowledge") {
    const auto triples = andy_triples();
    CHECK(extract_knowledge("NULL", "chat about the star", triples).empty());
    CHECK(extract_knowledge("Andy Lau", "chit-chat", triples).empty());

    const auto got = extract_knowledge("Andy Lau", "chat about the star", triples);
    REQUIRE(got.size() == 2);
    CHECK(got[0] == triples[0]);
    CHECK(got[1] == triples[2]);
    CHECK(extract_knowledge("  Andy   Lau ", "chat about the star", triples) == got);

    ExtractOptions with_objects;
    with_objects.include_object_matches = true;
    CHECK(extract_knowledge("Andy Lau", "chat", triples, with_objects).size() == 3);
    CHECK(extract_knowledge("nobody", "chat", triples).empty());
  }

  TEST_CASE("extraction never fabricates") {
    const auto triples = andy_triples();
    for (const auto& probe : triples) {
      for (const auto& topic : {probe.subject, probe.object}) {
        for (const auto& t : extract_knowledge(topic, "chat", triples, {true, {}})) {
          CHECK(std::find(triples.begin(), triples.end(), t) != triples.end());
        }
      }
    }
  }

  TEST_CASE("generation input") {
    CHECK(build_generation_input({}, {}, {}, "") == "[PROFILE] [KNOWLEDGE] [HISTORY] [ACTION]");

    corpus::UserProfile profile{{{"name", "Xiaoming"}, {"favorite star", "Andy Lau"}}};
    const auto triples = andy_triples();
    const auto extracted = extract_knowledge("Andy Lau", "chat about the star", triples);
    std::vector<corpus::Turn> history{{Role::User, "hello there", {}},
                                      {Role::System, "hi, how are you?", {}},
                                      {Role::User, "fine", {}}};
    const std::string got = build_generation_input(profile, extracted, history, "chat about the star");
    CHECK(got == build_generation_input(profile, extracted, history, "chat about the star"));

    std::ifstream in(kFixtures / "generation_input.golden.txt");
    std::string golden;
    std::getline(in, golden);
    CHECK(got == golden);
  }

  TEST_CASE("template table and realization") {
    TemplateTable table;
    table.add("movie recommendation", "you should watch {topic} , it has {relation} {object}");
    table.add("chit-chat", "how is your day going ?");
    table.add("chat about the star", "let us talk about someone");

    const std::vector<KnowledgeTriple> kx{{"movieX", "star", "S"}};
    const std::string rec = realize("in", {"movie recommendation", "movieX"}, kx, table);
    CHECK(rec.find("movieX") != std::string::npos);
    CHECK(rec.find("S") != std::string::npos);

    CHECK(realize("in", {"chit-chat", "NULL"}, {}, table) == "how is your day going ?");
    // Template without a topic slot still mentions the topic.
    CHECK(realize("in", {"chat about the star", "Andy Lau"}, {}, table) == "let us talk about someone Andy Lau");
    CHECK_THROWS_AS(realize("in", {"unknown action", "x"}, {}, table), RealizationError);

    table.add("chit-chat", "nice weather today");
    bool saw[2] = {false, false};
    for (int i = 0; i < 64; ++i) {
      const std::string input = "input " + std::to_string(i);
      const std::string u = realize(input, {"chit-chat", "NULL"}, {}, table);
      CHECK(u == realize(input, {"chit-chat", "NULL"}, {}, table));
      saw[0] = saw[0] || u == "how is your day going ?";
      saw[1] = saw[1] || u == "nice weather today";
    }
    CHECK(saw[0]);
    CHECK(saw[1]);

    const auto path = std::filesystem::temp_directory_path() / "tcplan_templates_test.tsv";
    table.save(path);
    const TemplateTable back = TemplateTable::load(path);
    CHECK(back.entries() == table.entries());
    std::ofstream(path) << "no tab here\n";
    CHECK_THROWS_AS(TemplateTable::load(path), ConfigError);
    std::filesystem::remove(path);
  }
}
