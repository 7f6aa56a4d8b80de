#include "tcplan/synthgen/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <deque>
#include <numeric>

#include "tcplan/error.hpp"
#include "tcplan/rng.hpp"

namespace tcplan::synthgen {

using corpus::DialogueSample;
using corpus::KnowledgeTriple;
using corpus::PlanStep;
using corpus::Role;

namespace {

constexpr int kTypes = 5;
constexpr int kCoreActions = 10;

constexpr std::array<const char*, kTypes> kTypeNames = {"star", "movie", "song", "food", "poi"};
constexpr std::array<const char*, kTypes> kAttributes = {"birthplace", "genre", "style", "taste", "district"};
constexpr std::array<const char*, kTypes> kAttributeValues = {"city", "genre", "style", "taste", "district"};

struct Opening {
  const char* action;
  const char* preference;
  const char* reply;
};
constexpr std::array<Opening, 5> kOpenings = {{
    {"chit-chat about weather", "weather", "yes , it is sunny today"},
    {"chit-chat about news", "news", "i have not read the news yet"},
    {"ask about hobby", "hobby", "i like reading books"},
    {"ask about work", "work", "work is busy these days"},
    {"ask about mood", "mood", "i feel good today"},
}};

constexpr const char* kNoPreference = "none";

bool compatible(TopicType a, TopicType b) {
  static const bool table[kTypes][kTypes] = {
      // star movie song food poi
      {false, true, true, true, false},   // star
      {true, false, true, false, true},   // movie
      {true, true, false, false, true},   // song
      {true, false, false, false, true},  // food
      {false, true, true, true, false},   // poi
  };
  return table[static_cast<int>(a)][static_cast<int>(b)];
}

std::string numbered(const char* stem, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%02d", i);
  return std::string(stem) + buf;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<int> bfs_distances(const World& w, int from) {
  std::vector<int> dist(w.topics.size(), -1);
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : w.adjacency[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

int topic_index(const World& w, const std::string& name) {
  for (std::size_t i = 0; i < w.topics.size(); ++i)
    if (w.topics[i].name == name) return static_cast<int>(i);
  return -1;
}

std::string profile_value(const corpus::UserProfile& p, const std::string& key) {
  for (const auto& e : p.entries)
    if (e.key == key) return e.value;
  return {};
}

std::string fill(std::string tmpl, const std::string& topic) {
  const auto pos = tmpl.find("{topic}");
  if (pos != std::string::npos) tmpl.replace(pos, 7, topic);
  return tmpl;
}

}  // namespace

void WorldSpec::validate() const {
  if (n_actions < kCoreActions || n_actions > kCoreActions + static_cast<int>(kOpenings.size()))
    throw ConfigError("n_actions must be in [10, 15]");
  if (n_topics < 2 * kTypes) throw ConfigError("n_topics must be at least 10");
  if (n_profile_keys < 2 || n_profile_keys > 7) throw ConfigError("n_profile_keys must be in [2, 7]");
  if (edges_per_topic < 1) throw ConfigError("edges_per_topic must be at least 1");
  if (hop_weights.empty()) throw ConfigError("hop_weights must not be empty");
  double total = 0.0;
  for (double w : hop_weights) {
    if (!(w >= 0.0)) throw ConfigError("hop_weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("hop_weights must not all be zero");
  if (opening_rate < 0.0 || opening_rate > 1.0) throw ConfigError("opening_rate must be in [0, 1]");
  if (max_steps < 4) throw ConfigError("max_steps must be at least 4");
  if (distractor_ratio < 0) throw ConfigError("distractor_ratio must be non-negative");
}

json spec_to_json(const WorldSpec& s) {
  json j = json::object();
  j["seed"] = s.seed;
  j["n_actions"] = s.n_actions;
  j["n_topics"] = s.n_topics;
  j["n_profile_keys"] = s.n_profile_keys;
  j["edges_per_topic"] = s.edges_per_topic;
  j["hop_weights"] = s.hop_weights;
  j["opening_rate"] = s.opening_rate;
  j["max_steps"] = s.max_steps;
  j["distractor_ratio"] = s.distractor_ratio;
  return j;
}

WorldSpec spec_from_json(const json& j, WorldSpec s) {
  FieldReader r(j, "world");
  r.get("seed", s.seed);
  r.get("n_actions", s.n_actions);
  r.get("n_topics", s.n_topics);
  r.get("n_profile_keys", s.n_profile_keys);
  r.get("edges_per_topic", s.edges_per_topic);
  r.get("hop_weights", s.hop_weights);
  r.get("opening_rate", s.opening_rate);
  r.get("max_steps", s.max_steps);
  r.get("distractor_ratio", s.distractor_ratio);
  r.finish();
  return s;
}

std::string chat_action(TopicType t) { return std::string("chat about ") + kTypeNames[static_cast<int>(t)]; }

std::string recommendation_action(TopicType t) {
  switch (t) {
    case TopicType::Movie: return "movie recommendation";
    case TopicType::Song: return "music recommendation";
    case TopicType::Food: return "food recommendation";
    case TopicType::Poi: return "poi recommendation";
    case TopicType::Star: break;
  }
  throw GenerationError("stars are never recommended");
}

std::string relation_name(TopicType from, TopicType to) {
  static const std::array<std::array<const char*, kTypes>, kTypes> names = {{
      {"", "acts in", "sings", "likes", ""},
      {"stars", "", "theme song", "", "filmed at"},
      {"sung by", "theme of", "", "", "performed at"},
      {"loved by", "", "", "", "served at"},
      {"", "location of", "hosted", "serves", ""},
  }};
  const char* n = names[static_cast<int>(from)][static_cast<int>(to)];
  if (*n == '\0') throw GenerationError("no relation between these topic types");
  return n;
}

World build_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  Rng rng(mix(spec.seed, 0xffffffffULL));
  std::array<int, kTypes> counts{};
  for (int i = 0; i < spec.n_topics; ++i) {
    const int t = i % kTypes;
    Topic topic;
    topic.type = static_cast<TopicType>(t);
    topic.name = numbered(kTypeNames[t], counts[t]++);
    topic.attribute = kAttributes[t];
    topic.value = numbered(kAttributeValues[t], static_cast<int>(rng.below(6)));
    if (topic.type == TopicType::Star) w.stars.push_back(topic.name);
    w.topics.push_back(std::move(topic));
  }
  const int n = spec.n_topics;
  w.adjacency.assign(n, {});
  auto connect = [&](int a, int b) {
    if (a == b) return;
    auto& adj = w.adjacency[a];
    if (std::find(adj.begin(), adj.end(), b) != adj.end()) return;
    adj.push_back(b);
    w.adjacency[b].push_back(a);
    w.edges.push_back({std::min(a, b), std::max(a, b)});
  };
  for (int i = 0; i < n; ++i) {
    std::vector<int> partners;
    for (int j = 0; j < n; ++j)
      if (compatible(w.topics[i].type, w.topics[j].type)) partners.push_back(j);
    for (int e = 0; e < spec.edges_per_topic; ++e) connect(i, partners[rng.below(partners.size())]);
  }
  // Join components until the graph is connected.
  for (;;) {
    const auto dist = bfs_distances(w, 0);
    int outside = -1;
    for (int i = 0; i < n && outside < 0; ++i)
      if (dist[i] < 0) outside = i;
    if (outside < 0) break;
    bool joined = false;
    for (int i = 0; i < n && !joined; ++i) {
      if (dist[i] < 0) continue;
      for (int j = 0; j < n && !joined; ++j) {
        if (dist[j] >= 0 || !compatible(w.topics[i].type, w.topics[j].type)) continue;
        connect(i, j);
        joined = true;
      }
    }
    if (!joined) throw GenerationError("cannot connect the transition graph");
  }
  for (auto& adj : w.adjacency) std::sort(adj.begin(), adj.end());
  std::sort(w.edges.begin(), w.edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  for (int i = 0; i < spec.n_actions - kCoreActions; ++i) w.openings.push_back(kOpenings[i].action);
  return w;
}

std::vector<int> shortest_path(const World& world, int from, int to) {
  const int n = static_cast<int>(world.topics.size());
  std::vector<int> parent(n, -2);
  std::deque<int> queue{from};
  parent[from] = -1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (u == to) break;
    for (int v : world.adjacency[u]) {
      if (parent[v] == -2) {
        parent[v] = u;
        queue.push_back(v);
      }
    }
  }
  if (parent[to] == -2) return {};
  std::vector<int> path;
  for (int v = to; v != -1; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<PlanStep> rule_plan(const World& world, const corpus::UserProfile& profile, int target) {
  const int start = topic_index(world, profile_value(profile, "favorite star"));
  if (start < 0) throw GenerationError("profile has no known favorite star");
  std::vector<PlanStep> plan{{"greeting", std::string(corpus::kNullTopic)}};
  const std::string pref = profile_value(profile, "chat preference");
  for (std::size_t i = 0; i < world.openings.size(); ++i)
    if (pref == kOpenings[i].preference) plan.push_back({world.openings[i], std::string(corpus::kNullTopic)});
  const auto path = shortest_path(world, start, target);
  if (path.size() < 2) throw GenerationError("target unreachable from " + world.topics[start].name);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Topic& t = world.topics[path[i]];
    plan.push_back({chat_action(t.type), t.name});
  }
  const Topic& goal = world.topics[target];
  plan.push_back({recommendation_action(goal.type), goal.name});
  return plan;
}

guidance::TemplateTable default_templates(const World& world) {
  guidance::TemplateTable t;
  t.add("greeting", "hello ! nice to meet you");
  t.add("greeting", "hi there , how are you today ?");
  t.add(guidance::kNeutralStep.action, "i see , tell me more");
  const std::array<std::pair<const char*, const char*>, kTypes> chats = {{
      {"do you know {topic} ? {topic} {relation} {object}", "let us talk about {topic} , who {relation} {object}"},
      {"have you seen {topic} ? it {relation} {object}", "{topic} is a fine movie , {relation} {object}"},
      {"have you heard {topic} ? {relation} {object}", "{topic} is a lovely song , {relation} {object}"},
      {"have you tried {topic} ? {relation} {object}", "{topic} is tasty , {relation} {object}"},
      {"have you been to {topic} ? {relation} {object}", "{topic} is a nice place , {relation} {object}"},
  }};
  for (int i = 0; i < kTypes; ++i) {
    t.add(chat_action(static_cast<TopicType>(i)), chats[i].first);
    t.add(chat_action(static_cast<TopicType>(i)), chats[i].second);
  }
  t.add("movie recommendation", "i recommend the movie {topic} , it {relation} {object}");
  t.add("movie recommendation", "you should watch {topic} , {relation} {object}");
  t.add("music recommendation", "i recommend the song {topic} , {relation} {object}");
  t.add("music recommendation", "you should listen to {topic} , {relation} {object}");
  t.add("food recommendation", "i recommend {topic} , {relation} {object}");
  t.add("food recommendation", "you should try {topic} , {relation} {object}");
  t.add("poi recommendation", "i recommend visiting {topic} , {relation} {object}");
  t.add("poi recommendation", "you should go to {topic} , {relation} {object}");
  const std::array<std::pair<const char*, const char*>, 5> openings = {{
      {"lovely weather today , is it not ?", "how is the weather where you are ?"},
      {"did you see the news today ?", "anything new in the news ?"},
      {"what do you do for fun ?", "do you have any hobby ?"},
      {"how is your work going ?", "are you busy with work ?"},
      {"how do you feel today ?", "are you in a good mood ?"},
  }};
  for (std::size_t i = 0; i < world.openings.size(); ++i) {
    t.add(world.openings[i], openings[i].first);
    t.add(world.openings[i], openings[i].second);
  }
  return t;
}

DialogueSample generate_one(const World& world, std::size_t index) {
  const WorldSpec& spec = world.spec;
  Rng rng(mix(spec.seed, index));
  DialogueSample s;
  char id[32];
  std::snprintf(id, sizeof id, "syn-%05zu", index);
  s.id = id;

  static const std::array<const char*, 5> extra_keys = {"name", "gender", "age range", "occupation", "city"};
  static const std::array<const char*, 2> genders = {"male", "female"};
  static const std::array<const char*, 4> ages = {"18-25", "26-35", "36-50", "over 50"};
  const int n_extra = spec.n_profile_keys - 2;
  for (int i = 0; i < n_extra; ++i) {
    const std::string key = extra_keys[i];
    std::string value;
    if (key == "name") value = numbered("user", static_cast<int>(rng.below(100)));
    else if (key == "gender") value = genders[rng.below(genders.size())];
    else if (key == "age range") value = ages[rng.below(ages.size())];
    else if (key == "occupation") value = numbered("job", static_cast<int>(rng.below(10)));
    else value = numbered("city", static_cast<int>(rng.below(6)));
    s.profile.entries.push_back({key, value});
  }
  const std::string star = world.stars[rng.below(world.stars.size())];
  s.profile.entries.push_back({"favorite star", star});
  std::string pref = kNoPreference;
  if (!world.openings.empty() && rng.bernoulli(spec.opening_rate))
    pref = kOpenings[rng.below(world.openings.size())].preference;
  s.profile.entries.push_back({"chat preference", pref});
  const int open = pref == kNoPreference ? 0 : 1;

  const int start = topic_index(world, star);
  const auto dist = bfs_distances(world, start);
  const int max_hops = spec.max_steps - 2 - open;
  std::vector<double> weights(spec.hop_weights.begin(), spec.hop_weights.end());
  if (static_cast<int>(weights.size()) > max_hops) weights.resize(max_hops);
  int target = -1;
  for (int attempt = 0; attempt < 32 && target < 0; ++attempt) {
    const int hops = static_cast<int>(rng.categorical(weights)) + 1;
    std::vector<int> candidates;
    for (std::size_t i = 0; i < world.topics.size(); ++i)
      if (dist[i] == hops && world.topics[i].type != TopicType::Star) candidates.push_back(static_cast<int>(i));
    if (!candidates.empty()) target = candidates[rng.below(candidates.size())];
  }
  if (target < 0) throw GenerationError("no reachable target for dialogue " + s.id);

  s.plans = rule_plan(world, s.profile, target);
  const auto path = shortest_path(world, start, target);

  std::vector<char> on_path(world.topics.size(), 0);
  for (int v : path) on_path[v] = 1;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Topic& a = world.topics[path[i]];
    const Topic& b = world.topics[path[i + 1]];
    s.knowledge.push_back({a.name, relation_name(a.type, b.type), b.name});
  }
  for (int v : path) s.knowledge.push_back({world.topics[v].name, world.topics[v].attribute, world.topics[v].value});
  std::vector<Edge> off_path;
  for (const Edge& e : world.edges)
    if (!on_path[e.a] && !on_path[e.b]) off_path.push_back(e);
  rng.shuffle(off_path);
  const std::size_t n_distract =
      std::min(off_path.size(), static_cast<std::size_t>(spec.distractor_ratio) * (path.size() - 1));
  for (std::size_t i = 0; i < n_distract; ++i) {
    int a = off_path[i].a, b = off_path[i].b;
    if (rng.bernoulli(0.5)) std::swap(a, b);
    s.knowledge.push_back(
        {world.topics[a].name, relation_name(world.topics[a].type, world.topics[b].type), world.topics[b].name});
  }
  rng.shuffle(s.knowledge);

  const guidance::TemplateTable templates = default_templates(world);
  static const std::array<const char*, 3> hellos = {"hi", "hello", "hi , anyone there ?"};
  static const std::array<const char*, 2> greeting_replies = {"hello , nice to meet you too", "i am fine , thanks"};
  static const std::array<const char*, 3> chat_replies = {"yes , i know {topic}", "tell me more about {topic}",
                                                          "oh , {topic} sounds interesting"};
  for (std::size_t k = 0; k < s.plans.size(); ++k) {
    std::string user;
    if (k == 0) {
      user = hellos[rng.below(hellos.size())];
    } else {
      const PlanStep& prev = s.plans[k - 1];
      if (prev.action == "greeting") {
        user = greeting_replies[rng.below(greeting_replies.size())];
      } else if (prev.null_topic()) {
        for (std::size_t i = 0; i < world.openings.size(); ++i)
          if (prev.action == world.openings[i]) user = kOpenings[i].reply;
      } else {
        user = fill(chat_replies[rng.below(chat_replies.size())], prev.topic);
      }
    }
    s.turns.push_back({Role::User, user, std::nullopt});
    const PlanStep& step = s.plans[k];
    const auto extracted = guidance::extract_knowledge(step.topic, step.action, s.knowledge);
    const std::string input = guidance::build_generation_input(s.profile, extracted, s.turns, step.action);
    s.turns.push_back({Role::System, guidance::realize(input, step, extracted, templates), static_cast<int>(k)});
  }
  corpus::validate(s);
  return s;
}

std::vector<DialogueSample> generate(const WorldSpec& spec, std::size_t n_dialogues) {
  const World world = build_world(spec);
  std::vector<DialogueSample> out;
  out.reserve(n_dialogues);
  for (std::size_t i = 0; i < n_dialogues; ++i) out.push_back(generate_one(world, i));
  return out;
}

corpus::Splits make_splits(const std::vector<DialogueSample>& samples, std::uint64_t seed, double train, double dev) {
  if (train < 0.0 || dev < 0.0 || train + dev > 1.0) throw ConfigError("split fractions must be within [0, 1]");
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(mix(seed, 0xfffffffeULL));
  rng.shuffle(ids);
  const std::size_t n = ids.size();
  const auto n_train = static_cast<std::size_t>(train * static_cast<double>(n) + 0.5);
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(dev * static_cast<double>(n) + 0.5));
  corpus::Splits s;
  s.train.assign(ids.begin(), ids.begin() + n_train);
  s.dev.assign(ids.begin() + n_train, ids.begin() + n_train + n_dev);
  s.test.assign(ids.begin() + n_train + n_dev, ids.end());
  for (auto* part : {&s.train, &s.dev, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

}  // namespace tcplan::synthgen
