// tcplan command-line tool: synth, ingest, train, plan, eval, chat.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "tcplan/corpus/instances.hpp"
#include "tcplan/corpus/jsonl.hpp"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"
#include "tcplan/guidance/guidance.hpp"
#include "tcplan/metrics/evaluate.hpp"
#include "tcplan/synthgen/synthgen.hpp"
#include "tcplan/training/checkpoint.hpp"
#include "tcplan/training/training.hpp"

using namespace tcplan;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::Config: return 2;
    case ErrorClass::Data: return 3;
    case ErrorClass::Checkpoint: return 4;
    case ErrorClass::Runtime: return 5;
  }
  return 5;
}

struct Settings {
  synthgen::WorldSpec world;
  planner::PlannerConfig planner = planner::PlannerConfig::desk_scale();
  training::TrainConfig train = training::TrainConfig::desk_scale();
  std::string schema = "canonical";
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  FieldReader r(j, "config");
  std::string scale = "desk";
  r.get("scale", scale);
  if (scale == "paper") {
    s.planner = planner::PlannerConfig::paper_scale();
    s.train = training::TrainConfig::paper_scale();
  } else if (scale != "desk") {
    throw ConfigError("scale must be 'desk' or 'paper'");
  }
  json section;
  if (r.get("world", section)) s.world = synthgen::spec_from_json(section, s.world);
  if (r.get("planner", section)) s.planner = planner::config_from_json(section, s.planner);
  if (r.get("train", section)) s.train = training::config_from_json(section, s.train);
  r.get("schema", s.schema);
  r.finish();
  return s;
}

std::vector<corpus::DialogueSample> load_targets(const std::string& path, const std::string& schema,
                                                 std::vector<std::string>* excluded = nullptr) {
  return corpus::create_targets(corpus::load_corpus(path, corpus::parse_schema_mode(schema)), {}, excluded);
}

std::vector<corpus::DialogueSample> load_split(const std::string& corpus_path, const std::string& schema,
                                               const std::string& splits_path, const std::string& split) {
  auto samples = load_targets(corpus_path, schema);
  if (splits_path.empty()) return samples;
  const auto splits = corpus::read_splits(splits_path);
  if (split == "train") return corpus::select_ids(samples, splits.train);
  if (split == "dev") return corpus::select_ids(samples, splits.dev);
  if (split == "test") return corpus::select_ids(samples, splits.test);
  throw ConfigError("split must be train, dev or test");
}

const corpus::DialogueSample& find_sample(const std::vector<corpus::DialogueSample>& samples, const std::string& id) {
  for (const auto& s : samples)
    if (s.id == id) return s;
  throw SchemaError("no sample with id '" + id + "'");
}

std::string step_string(const corpus::PlanStep& s) { return "(" + s.action + ", " + s.topic + ")"; }

std::string path_string(const planner::PlanPath& p) {
  std::string out = "[";
  for (std::size_t i = 0; i < p.steps.size(); ++i) out += (i ? ", " : "") + step_string(p.steps[i]);
  return out + "]";
}

json step_json(const corpus::PlanStep& s) { return json::array({s.action, s.topic}); }

json path_json(const planner::PlanPath& p) {
  json out = json::array();
  for (const auto& s : p.steps) out.push_back(step_json(s));
  return out;
}

corpus::PlanStep parse_step_flag(const std::string& text) {
  const auto bar = text.find('|');
  if (bar == std::string::npos) throw ConfigError("--target must be 'action|topic'");
  return {corpus::normalize_space(text.substr(0, bar)), corpus::normalize_space(text.substr(bar + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target-driven conversation planning: synthetic data, planner training and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  bool as_json = false;
  app.add_option("--config", config_path, "JSON config with world/planner/train sections");
  app.add_flag("--json", as_json, "machine-readable output");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::optional<std::uint64_t> seed;
  std::size_t n_dialogues = 2000;
  std::string out_dir = ".";
  synth->add_option("--seed", seed, "world and dialogue seed")->required();
  synth->add_option("--dialogues", n_dialogues, "number of dialogues")->capture_default_str();
  synth->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and build its vocabulary");
  std::string corpus_path, schema, splits_path;
  ingest->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  ingest->add_option("--schema", schema, "canonical or durecdial");
  ingest->add_option("--splits", splits_path, "splits file; vocabulary is built from its train ids");
  ingest->add_option("--out-dir", out_dir, "where vocab.txt and corpus.canonical.jsonl go");

  // train
  auto* train = app.add_subcommand("train", "train the planner");
  std::string checkpoint_path = "planner.ckpt", log_path;
  std::optional<std::size_t> epochs, batch_size, max_steps, warmup;
  std::optional<double> lr;
  train->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  train->add_option("--splits", splits_path, "splits file (dev split drives selection)")->required();
  train->add_option("--schema", schema, "canonical or durecdial");
  train->add_option("--seed", seed, "initialization and shuffling seed")->required();
  train->add_option("--out", checkpoint_path, "checkpoint path")->capture_default_str();
  train->add_option("--log", log_path, "JSON-lines training log");
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr);
  train->add_option("--batch-size", batch_size, "dialogues per step");
  train->add_option("--warmup", warmup);
  train->add_option("--max-steps", max_steps);

  // plan
  auto* plan = app.add_subcommand("plan", "decode the plan for one sample and turn");
  std::string sample_id;
  std::size_t turn = 0;
  plan->add_option("--checkpoint", checkpoint_path, "checkpoint")->required();
  plan->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  plan->add_option("--schema", schema, "canonical or durecdial");
  plan->add_option("--sample", sample_id, "sample id")->required();
  plan->add_option("--turn", turn, "index of a system turn")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "score planning and end-to-end metrics");
  std::string split = "dev", templates_path, out_path;
  bool smooth = false;
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint")->required();
  eval->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  eval->add_option("--schema", schema, "canonical or durecdial");
  eval->add_option("--splits", splits_path, "splits file");
  eval->add_option("--split", split, "train, dev or test")->capture_default_str();
  eval->add_option("--templates", templates_path, "template table; enables dialogue metrics");
  eval->add_option("--out", out_path, "write the MetricReport JSON here");
  eval->add_flag("--smooth-bleu", smooth, "add-one smoothing for BLEU orders above 1");

  // chat
  auto* chat = app.add_subcommand("chat", "interactive planning loop over one sample's profile and knowledge");
  std::string target_flag;
  chat->add_option("--checkpoint", checkpoint_path, "checkpoint")->required();
  chat->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  chat->add_option("--schema", schema, "canonical or durecdial");
  chat->add_option("--sample", sample_id, "sample providing profile, knowledge and target")->required();
  chat->add_option("--templates", templates_path, "template table")->required();
  chat->add_option("--target", target_flag, "override target as 'action|topic'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Settings settings = load_settings(config_path);
    if (schema.empty()) schema = settings.schema;

    if (*synth) {
      settings.world.seed = *seed;
      settings.world.validate();
      fs::create_directories(out_dir);
      const auto samples = synthgen::generate(settings.world, n_dialogues);
      corpus::write_corpus(fs::path(out_dir) / "corpus.jsonl", samples);
      corpus::write_splits(fs::path(out_dir) / "splits.json", synthgen::make_splits(samples, *seed));
      synthgen::default_templates(synthgen::build_world(settings.world)).save(fs::path(out_dir) / "templates.tsv");
      if (as_json) {
        std::cout << json{{"dialogues", samples.size()}, {"out_dir", out_dir},
                          {"world", synthgen::spec_to_json(settings.world)}}.dump() << '\n';
      } else {
        std::cout << "wrote " << samples.size() << " dialogues, splits and templates to " << out_dir << '\n';
      }
      return 0;
    }

    if (*ingest) {
      std::ifstream in(corpus_path);
      if (!in) throw SchemaError("cannot open corpus " + corpus_path);
      const auto loaded = corpus::read_corpus(in, corpus::parse_schema_mode(schema));
      std::vector<std::string> excluded;
      const auto samples = corpus::create_targets(loaded.samples, {}, &excluded);
      std::vector<corpus::DialogueSample> vocab_source = samples;
      if (!splits_path.empty()) vocab_source = corpus::select_ids(samples, corpus::read_splits(splits_path).train);
      std::size_t instances = 0;
      for (const auto& s : samples) instances += corpus::make_training_instances(s).size();
      const auto vocab = corpus::build_vocab(vocab_source, settings.planner.tokenizer);
      json report = {{"lines", loaded.lines_read},   {"valid", loaded.samples.size()},
                     {"with_target", samples.size()}, {"instances", instances},
                     {"vocab_size", vocab.size()},    {"excluded_no_target", excluded}};
      json issues = json::array();
      for (const auto& issue : loaded.issues) issues.push_back({{"line", issue.line}, {"error", issue.message}});
      report["issues"] = issues;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        vocab.save(fs::path(out_dir) / "vocab.txt");
        corpus::write_corpus(fs::path(out_dir) / "corpus.canonical.jsonl", samples);
      }
      if (as_json) {
        std::cout << report.dump() << '\n';
      } else {
        std::cout << loaded.lines_read << " records, " << loaded.samples.size() << " valid, " << samples.size()
                  << " with a recommendation target, " << instances << " planning instances, vocabulary "
                  << vocab.size() << '\n';
        for (const auto& issue : loaded.issues) std::cout << "  line " << issue.line << ": " << issue.message << '\n';
      }
      return loaded.issues.empty() ? 0 : 3;
    }

    if (*train) {
      auto& tc = settings.train;
      tc.seed = *seed;
      if (epochs) tc.epochs = *epochs;
      if (lr) tc.lr = *lr;
      if (batch_size) tc.batch_size = *batch_size;
      if (warmup) tc.warmup_steps = *warmup;
      if (max_steps) tc.max_steps = *max_steps;
      const auto train_samples = load_split(corpus_path, schema, splits_path, "train");
      const auto dev_samples = load_split(corpus_path, schema, splits_path, "dev");
      auto model = planner::init_model(settings.planner, corpus::build_vocab(train_samples, settings.planner.tokenizer),
                                       *seed);
      const auto train_groups = training::make_groups(model, corpus::make_instances(train_samples));
      const auto dev_groups = training::make_groups(model, corpus::make_instances(dev_samples));
      std::ofstream log;
      training::TrainHooks hooks;
      if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw ConfigError("cannot write log " + log_path);
        hooks.log = &log;
      }
      hooks.dump_dir = fs::path(checkpoint_path).parent_path();
      if (!as_json) {
        hooks.on_epoch = [](const training::EpochLog& e) {
          std::printf("epoch %zu  train loss %.4f  dev token acc %.4f  (%.1fs)\n", e.epoch, e.train_loss,
                      e.dev_token_accuracy, e.seconds);
          std::fflush(stdout);
        };
      }
      const auto started = std::chrono::steady_clock::now();
      const auto result = training::train(model, train_groups, dev_groups, tc, hooks);
      training::save_checkpoint(model, checkpoint_path);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      if (as_json) {
        std::cout << json{{"checkpoint", checkpoint_path},
                          {"steps", result.total_steps},
                          {"best_epoch", result.best_epoch},
                          {"best_dev_token_accuracy", result.best_dev_token_accuracy},
                          {"seconds", secs}}.dump()
                  << '\n';
      } else {
        std::printf("best epoch %zu (dev token acc %.4f); %zu steps in %.1fs; saved %s\n", result.best_epoch,
                    result.best_dev_token_accuracy, result.total_steps, secs, checkpoint_path.c_str());
      }
      return 0;
    }

    if (*plan) {
      const auto model = training::load_checkpoint(checkpoint_path);
      const auto samples = load_targets(corpus_path, schema);
      const auto& sample = find_sample(samples, sample_id);
      if (turn >= sample.turns.size() || sample.turns[turn].role != corpus::Role::System) {
        throw ConfigError("--turn must index a system turn of the sample");
      }
      const auto input = encoders::make_encoder_input(sample, turn, *sample.target, model.vocab, model.config);
      const auto decoded = planner::greedy_decode(model, input);
      const auto choice =
          guidance::choose_prompt(decoded.tokens, *sample.target, model.config.tokenizer, guidance::FallbackPolicy::Target);
      if (as_json) {
        std::cout << json{{"decoded", decoded.tokens},
                          {"path", path_json(choice.path)},
                          {"parsed", choice.parsed},
                          {"prompt", step_json(choice.step)},
                          {"fallback", choice.fallback},
                          {"note", choice.note}}.dump()
                  << '\n';
      } else {
        std::cout << "decoded: " << planner::join_plan_tokens(decoded.tokens) << '\n'
                  << "path:    " << path_string(choice.path) << (choice.parsed ? "" : "  (partial)") << '\n'
                  << "prompt:  " << step_string(choice.step) << (choice.fallback ? "  (fallback)" : "") << '\n';
        if (!choice.note.empty()) std::cout << "note:    " << choice.note << '\n';
      }
      return 0;
    }

    if (*eval) {
      const auto model = training::load_checkpoint(checkpoint_path);
      const auto samples = load_split(corpus_path, schema, splits_path, split);
      const auto instances = corpus::make_instances(samples);
      std::optional<guidance::TemplateTable> templates;
      if (!templates_path.empty()) templates = guidance::TemplateTable::load(templates_path);
      metrics::EvalOptions opts;
      opts.smooth_bleu = smooth;
      auto ev = metrics::evaluate(model, instances, templates ? &*templates : nullptr, opts);
      if (!instances.empty()) {
        ev.report.values["ppl"] = metrics::planner_perplexity(model, training::make_groups(model, instances));
      }
      ev.report.notes["split"] = split;
      const json j = ev.report.to_json();
      if (!out_path.empty()) std::ofstream(out_path) << j.dump(1) << '\n';
      if (as_json) {
        std::cout << j.dump() << '\n';
      } else {
        for (auto it = j.begin(); it != j.end(); ++it) std::cout << it.key() << ": " << it.value().dump() << '\n';
      }
      return 0;
    }

    if (*chat) {
      const auto model = training::load_checkpoint(checkpoint_path);
      const auto samples = load_targets(corpus_path, schema);
      const auto templates = guidance::TemplateTable::load(templates_path);
      corpus::DialogueSample convo = find_sample(samples, sample_id);
      const corpus::PlanStep target = target_flag.empty() ? *convo.target : parse_step_flag(target_flag);
      convo.turns.clear();
      std::cout << "target " << step_string(target) << "; type a user utterance, empty line or EOF to stop\n";
      std::string line;
      while (std::cout << "user> " << std::flush, std::getline(std::cin, line) && !line.empty()) {
        convo.turns.push_back({corpus::Role::User, line, std::nullopt});
        const std::size_t at = convo.turns.size();
        const auto input = encoders::make_encoder_input(convo, at, target, model.vocab, model.config);
        const auto decoded = planner::greedy_decode(model, input);
        const auto choice =
            guidance::choose_prompt(decoded.tokens, target, model.config.tokenizer, guidance::FallbackPolicy::Target);
        const corpus::PlanStep& step = choice.step;
        if (!templates.covers(step.action)) {
          std::cout << "plan:   " << path_string(choice.path) << '\n'
                    << "system> (no template for action '" << step.action << "')\n";
          continue;
        }
        const auto extracted = guidance::extract_knowledge(step.topic, step.action, convo.knowledge);
        const auto gen_input = guidance::build_generation_input(convo.profile, extracted, convo.turns, step.action);
        const auto reply = guidance::realize(gen_input, step, extracted, templates);
        std::cout << "plan:   " << path_string(choice.path) << '\n' << "system> " << reply << '\n';
        convo.turns.push_back({corpus::Role::System, reply, std::nullopt});
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  }
  return 0;
}
