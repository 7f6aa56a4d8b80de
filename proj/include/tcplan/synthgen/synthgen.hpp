#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcplan/corpus/jsonl.hpp"
#include "tcplan/corpus/types.hpp"
#include "tcplan/guidance/guidance.hpp"
#include "tcplan/json_fields.hpp"

namespace tcplan::synthgen {

struct WorldSpec {
  std::uint64_t seed = 1;
  int n_actions = 15;        // 10 core actions plus up to 5 topic-free openings
  int n_topics = 60;         // spread round-robin over five topic types
  int n_profile_keys = 5;    // favorite star and chat preference always present
  int edges_per_topic = 2;   // transition-graph density
  std::vector<double> hop_weights{0.30, 0.45, 0.20, 0.05};  // P(hops = 1, 2, ...)
  double opening_rate = 0.5; // share of users with a chat preference
  int max_steps = 7;         // two turns per step, so at most 14 turns
  int distractor_ratio = 3;  // distractor edges per path edge

  // Throws ConfigError.
  void validate() const;
};

enum class TopicType { Star, Movie, Song, Food, Poi };

struct Topic {
  std::string name;
  TopicType type;
  std::string attribute;  // relation of the topic's fixed attribute triple
  std::string value;
};

struct Edge {
  int a = 0;
  int b = 0;
};

struct World {
  WorldSpec spec;
  std::vector<Topic> topics;
  std::vector<std::vector<int>> adjacency;  // sorted neighbour indices
  std::vector<Edge> edges;                  // a < b
  std::vector<std::string> openings;        // topic-free opening actions
  std::vector<std::string> stars;           // names of star topics
};

json spec_to_json(const WorldSpec& spec);
WorldSpec spec_from_json(const json& j, WorldSpec base = {});

World build_world(const WorldSpec& spec);

std::string chat_action(TopicType t);
std::string recommendation_action(TopicType t);
std::string relation_name(TopicType from, TopicType to);

// Shortest path from `from` to `to` over the world graph; ties go to the
// lowest-index predecessor. Empty when unreachable.
std::vector<int> shortest_path(const World& world, int from, int to);

// The rule set: greeting, the opening matching the user's chat preference
// (if any), a chat step per topic on the shortest path from the favorite star,
// and the recommendation of the target.
std::vector<corpus::PlanStep> rule_plan(const World& world, const corpus::UserProfile& profile, int target);

corpus::DialogueSample generate_one(const World& world, std::size_t index);
std::vector<corpus::DialogueSample> generate(const WorldSpec& spec, std::size_t n_dialogues);

// System-side utterance templates for every action of the world.
guidance::TemplateTable default_templates(const World& world);

// Seeded 80/10/10 split of sample ids.
corpus::Splits make_splits(const std::vector<corpus::DialogueSample>& samples, std::uint64_t seed,
                           double train = 0.8, double dev = 0.1);

}  // namespace tcplan::synthgen
