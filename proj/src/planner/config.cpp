#include "tcplan/planner/config.hpp"

#include "tcplan/error.hpp"

namespace tcplan::planner {

void PlannerConfig::validate() const {
  if (vocab_size < 9) throw ConfigError("vocab_size must cover the reserved tokens");
  if (d == 0 || n_heads == 0 || d % n_heads != 0) throw ConfigError("d must be a positive multiple of n_heads");
  if (n_layers == 0) throw ConfigError("n_layers must be positive");
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (max_plan_len < 2) throw ConfigError("max_plan_len must be at least 2");
  if (max_prefix_len < 5) throw ConfigError("max_prefix_len must be at least 5");
  if (history_budget < 1) throw ConfigError("history_budget must be at least 1");
  if (knowledge_budget < 1) throw ConfigError("knowledge_budget must be at least 1");
  if (profile_hops < 1) throw ConfigError("profile_hops must be at least 1");
}

PlannerConfig PlannerConfig::desk_scale() { return PlannerConfig{}; }

PlannerConfig PlannerConfig::paper_scale() {
  PlannerConfig c;
  c.d = 768;
  c.n_layers = 12;
  c.n_heads = 8;
  c.d_ff = 3072;
  c.encoder_layers = 12;
  c.history_budget = 512;
  c.knowledge_budget = 512;
  c.tokenizer = corpus::TokenizerMode::Char;
  return c;
}

std::string mutual_attention_name(MutualAttention m) { return m == MutualAttention::On ? "on" : "ones"; }

MutualAttention parse_mutual_attention(const std::string& s) {
  if (s == "on") return MutualAttention::On;
  if (s == "ones") return MutualAttention::Ones;
  throw ConfigError("mutual_attention must be 'on' or 'ones'");
}

std::string branch_mode_name(BranchMode b) { return b == BranchMode::Parallel ? "parallel" : "shared"; }

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "parallel") return BranchMode::Parallel;
  if (s == "shared") return BranchMode::Shared;
  throw ConfigError("branches must be 'parallel' or 'shared'");
}

json config_to_json(const PlannerConfig& c) {
  json j = json::object();
  j["vocab_size"] = c.vocab_size;
  j["d"] = c.d;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["encoder_layers"] = c.encoder_layers;
  j["max_plan_len"] = c.max_plan_len;
  j["max_prefix_len"] = c.max_prefix_len;
  j["history_budget"] = c.history_budget;
  j["knowledge_budget"] = c.knowledge_budget;
  j["profile_hops"] = c.profile_hops;
  j["mutual_attention"] = mutual_attention_name(c.mutual);
  j["branches"] = branch_mode_name(c.branches);
  j["tokenizer"] = std::string(corpus::tokenizer_mode_name(c.tokenizer));
  return j;
}

PlannerConfig config_from_json(const json& j, PlannerConfig c) {
  FieldReader r(j, "planner");
  r.get("vocab_size", c.vocab_size);
  r.get("d", c.d);
  r.get("n_layers", c.n_layers);
  r.get("n_heads", c.n_heads);
  r.get("d_ff", c.d_ff);
  r.get("encoder_layers", c.encoder_layers);
  r.get("max_plan_len", c.max_plan_len);
  r.get("max_prefix_len", c.max_prefix_len);
  r.get("history_budget", c.history_budget);
  r.get("knowledge_budget", c.knowledge_budget);
  r.get("profile_hops", c.profile_hops);
  std::string s;
  if (r.get("mutual_attention", s)) c.mutual = parse_mutual_attention(s);
  if (r.get("branches", s)) c.branches = parse_branch_mode(s);
  if (r.get("tokenizer", s)) c.tokenizer = corpus::parse_tokenizer_mode(s);
  r.finish();
  return c;
}

}  // namespace tcplan::planner
