#include "tcplan/corpus/jsonl.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "json.hpp"
#include "tcplan/error.hpp"

namespace tcplan::corpus {

namespace {

using json = nlohmann::ordered_json;

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + field + "'");
  return *it;
}

std::string require_string(const json& v, const std::string& what) {
  if (!v.is_string()) throw SchemaError(what + " must be a string");
  return v.get<std::string>();
}

std::string profile_value(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += "; ";
      out += item.is_string() ? item.get<std::string>() : item.dump();
    }
    return out;
  }
  throw SchemaError("user_profile['" + key + "'] has unsupported type");
}

UserProfile parse_profile(const json& rec) {
  const json& p = require(rec, "user_profile");
  if (!p.is_object()) throw SchemaError("user_profile must be an object");
  UserProfile profile;
  for (auto it = p.begin(); it != p.end(); ++it) {
    profile.entries.push_back({it.key(), profile_value(it.value(), it.key())});
  }
  return profile;
}

std::vector<KnowledgeTriple> parse_knowledge(const json& rec) {
  const json& k = require(rec, "knowledge");
  if (!k.is_array()) throw SchemaError("knowledge must be an array");
  std::vector<KnowledgeTriple> out;
  for (const auto& t : k) {
    if (!t.is_array() || t.size() != 3) throw SchemaError("knowledge entries must be [subject, relation, object]");
    out.push_back({normalize_space(require_string(t[0], "knowledge subject")),
                   normalize_space(require_string(t[1], "knowledge relation")),
                   normalize_space(require_string(t[2], "knowledge object"))});
  }
  return out;
}

PlanStep parse_step(const json& g, const char* what) {
  if (!g.is_array() || g.size() != 2) throw SchemaError(std::string(what) + " entries must be [action, topic]");
  return {normalize_space(require_string(g[0], "action")), normalize_space(require_string(g[1], "topic"))};
}

Role parse_role(const json& v) {
  const std::string r = require_string(v, "role");
  if (r == "user") return Role::User;
  if (r == "system" || r == "bot") return Role::System;
  throw SchemaError("unknown role '" + r + "'");
}

DialogueSample parse_canonical(const json& rec) {
  DialogueSample s;
  if (auto it = rec.find("id"); it != rec.end()) s.id = it->is_string() ? it->get<std::string>() : it->dump();
  s.profile = parse_profile(rec);
  s.knowledge = parse_knowledge(rec);
  const json& conv = require(rec, "conversation");
  if (!conv.is_array()) throw SchemaError("conversation must be an array");
  for (const auto& t : conv) {
    if (!t.is_object()) throw SchemaError("conversation entries must be objects");
    Turn turn;
    turn.role = parse_role(require(t, "role"));
    turn.utterance = require_string(require(t, "utterance"), "utterance");
    if (auto it = t.find("goal_index"); it != t.end()) {
      if (!it->is_number_integer()) throw SchemaError("goal_index must be an integer");
      turn.goal_index = it->get<int>();
    }
    s.turns.push_back(std::move(turn));
  }
  const json& goals = require(rec, "goals");
  if (!goals.is_array()) throw SchemaError("goals must be an array");
  for (const auto& g : goals) s.plans.push_back(parse_step(g, "goals"));
  if (auto it = rec.find("target"); it != rec.end() && !it->is_null()) s.target = parse_step(*it, "target");
  return s;
}

DialogueSample parse_durecdial(const json& rec) {
  DialogueSample s;
  if (auto it = rec.find("id"); it != rec.end()) s.id = it->is_string() ? it->get<std::string>() : it->dump();
  s.profile = parse_profile(rec);
  s.knowledge = parse_knowledge(rec);
  const json& conv = require(rec, "conversation");
  const json& types = require(rec, "goal_type_list");
  const json& topics = require(rec, "goal_topic_list");
  if (!conv.is_array() || !types.is_array() || !topics.is_array()) {
    throw SchemaError("conversation, goal_type_list and goal_topic_list must be arrays");
  }
  if (types.size() != conv.size() || topics.size() != conv.size()) {
    throw SchemaError("goal_type_list/goal_topic_list must align with conversation");
  }
  Role role = Role::User;
  if (auto it = rec.find("first_speaker"); it != rec.end()) role = parse_role(*it);
  for (std::size_t i = 0; i < conv.size(); ++i) {
    PlanStep step{normalize_space(require_string(types[i], "goal type")),
                  normalize_space(require_string(topics[i], "goal topic"))};
    if (step.topic.empty()) step.topic = std::string(kNullTopic);
    if (s.plans.empty() || !(s.plans.back() == step)) s.plans.push_back(step);
    Turn turn;
    turn.role = role;
    turn.utterance = require_string(conv[i], "utterance");
    turn.goal_index = static_cast<int>(s.plans.size() - 1);
    s.turns.push_back(std::move(turn));
    role = role == Role::User ? Role::System : Role::User;
  }
  if (auto it = rec.find("target"); it != rec.end() && !it->is_null()) s.target = parse_step(*it, "target");
  return s;
}

}  // namespace

SchemaMode parse_schema_mode(const std::string& name) {
  if (name == "canonical") return SchemaMode::Canonical;
  if (name == "durecdial") return SchemaMode::DuRecDial;
  throw ConfigError("unknown schema mode '" + name + "' (expected canonical or durecdial)");
}

DialogueSample parse_record(const std::string& line, SchemaMode mode) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw SchemaError("record must be a JSON object");
  DialogueSample s = mode == SchemaMode::Canonical ? parse_canonical(rec) : parse_durecdial(rec);
  validate(s);
  return s;
}

LoadResult read_corpus(std::istream& in, SchemaMode mode) {
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.lines_read;
    try {
      DialogueSample s = parse_record(line, mode);
      if (s.id.empty()) s.id = "line-" + std::to_string(lineno);
      result.samples.push_back(std::move(s));
    } catch (const Error& e) {
      result.issues.push_back({lineno, e.what()});
    }
  }
  return result;
}

std::vector<DialogueSample> load_corpus(const std::filesystem::path& path, SchemaMode mode) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open corpus " + path.string());
  std::vector<DialogueSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      DialogueSample s = parse_record(line, mode);
      if (s.id.empty()) s.id = "line-" + std::to_string(lineno);
      out.push_back(std::move(s));
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string serialize_sample(const DialogueSample& s) {
  json rec = json::object();
  rec["id"] = s.id;
  json profile = json::object();
  for (const auto& e : s.profile.entries) profile[e.key] = e.value;
  rec["user_profile"] = std::move(profile);
  json knowledge = json::array();
  for (const auto& t : s.knowledge) knowledge.push_back(json::array({t.subject, t.relation, t.object}));
  rec["knowledge"] = std::move(knowledge);
  json conv = json::array();
  for (const auto& t : s.turns) {
    json turn = json::object();
    turn["role"] = std::string(role_name(t.role));
    turn["utterance"] = t.utterance;
    if (t.goal_index) turn["goal_index"] = *t.goal_index;
    conv.push_back(std::move(turn));
  }
  rec["conversation"] = std::move(conv);
  json goals = json::array();
  for (const auto& p : s.plans) goals.push_back(json::array({p.action, p.topic}));
  rec["goals"] = std::move(goals);
  if (s.target) rec["target"] = json::array({s.target->action, s.target->topic});
  return rec.dump();
}

void write_corpus(const std::filesystem::path& path, const std::vector<DialogueSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write corpus " + path.string());
  for (const auto& s : samples) out << serialize_sample(s) << '\n';
}

void write_splits(const std::filesystem::path& path, const Splits& splits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write splits " + path.string());
  json j = json::object();
  j["train"] = splits.train;
  j["dev"] = splits.dev;
  j["test"] = splits.test;
  out << j.dump(1) << '\n';
}

Splits read_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open splits " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  Splits s;
  auto list = [&](const char* key) {
    const json& v = require(j, key);
    if (!v.is_array()) throw SchemaError(std::string("splits '") + key + "' must be an array");
    return v.get<std::vector<std::string>>();
  };
  s.train = list("train");
  s.dev = list("dev");
  s.test = list("test");
  return s;
}

}  // namespace tcplan::corpus
