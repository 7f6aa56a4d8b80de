#include <fstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tcplan/corpus/instances.hpp"
#include "tcplan/corpus/jsonl.hpp"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"
#include "tcplan/guidance/guidance.hpp"
#include "tcplan/metrics/evaluate.hpp"
#include "tcplan/synthgen/synthgen.hpp"
#include "tcplan/training/checkpoint.hpp"
#include "tcplan/training/training.hpp"

namespace py = pybind11;
using namespace tcplan;
using StepTuple = std::pair<std::string, std::string>;

namespace {

std::vector<StepTuple> to_tuples(const planner::PlanPath& p) {
  std::vector<StepTuple> out;
  for (const auto& s : p.steps) out.emplace_back(s.action, s.topic);
  return out;
}

std::vector<corpus::DialogueSample> load_split(const std::string& corpus_path, const std::string& splits_path,
                                               const std::string& split) {
  auto samples = corpus::create_targets(corpus::load_corpus(corpus_path), {});
  if (splits_path.empty()) return samples;
  const auto s = corpus::read_splits(splits_path);
  if (split == "train") return corpus::select_ids(samples, s.train);
  if (split == "dev") return corpus::select_ids(samples, s.dev);
  if (split == "test") return corpus::select_ids(samples, s.test);
  throw ConfigError("split must be train, dev or test");
}

class Planner {
 public:
  explicit Planner(planner::Model m) : model_(std::move(m)) {}

  static Planner load(const std::string& path) { return Planner(training::load_checkpoint(path)); }
  void save(const std::string& path) const { training::save_checkpoint(model_, path); }
  std::string config() const { return planner::config_to_json(model_.config).dump(); }
  std::size_t parameter_count() const { return model_.weights.parameter_count(); }
  std::vector<std::string> vocab() const { return model_.vocab.tokens(); }

  py::dict plan(const std::string& record, std::size_t turn) const {
    const auto sample = corpus::create_target(corpus::parse_record(record, corpus::SchemaMode::Canonical));
    const auto input = encoders::make_encoder_input(sample, turn, *sample.target, model_.vocab, model_.config);
    const auto decoded = planner::greedy_decode(model_, input);
    const auto choice = guidance::choose_prompt(decoded.tokens, *sample.target, model_.config.tokenizer,
                                                guidance::FallbackPolicy::Target);
    py::dict d;
    d["decoded"] = decoded.tokens;
    d["path"] = to_tuples(choice.path);
    d["prompt"] = StepTuple{choice.step.action, choice.step.topic};
    d["parsed"] = choice.parsed;
    d["fallback"] = choice.fallback;
    return d;
  }

  // Teacher-forced logits of the sample's gold plan at `turn`.
  py::array_t<double> logits(const std::string& record, std::size_t turn) const {
    const auto sample = corpus::create_target(corpus::parse_record(record, corpus::SchemaMode::Canonical));
    for (const auto& inst : corpus::make_training_instances(sample)) {
      if (inst.turn != turn) continue;
      const auto t = planner::example_logits(model_, planner::make_example(model_, inst));
      py::array_t<double> out({t.rows(), t.cols()});
      auto view = out.mutable_unchecked<2>();
      for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) view(i, j) = t(i, j);
      return out;
    }
    throw InputError("turn " + std::to_string(turn) + " is not a planning instance of the sample");
  }

 private:
  planner::Model model_;
};

}  // namespace

PYBIND11_MODULE(_tcplan, m) {
  m.doc() = "tcplan core bindings";
  py::register_exception<Error>(m, "TcplanError", PyExc_RuntimeError);

  m.def("generate_corpus", [](std::uint64_t seed, std::size_t n) {
        synthgen::WorldSpec spec;
        spec.seed = seed;
        std::vector<std::string> lines;
        for (const auto& s : synthgen::generate(spec, n)) lines.push_back(corpus::serialize_sample(s));
        return lines;
      }, py::arg("seed"), py::arg("n_dialogues"), "Synthetic dialogues as canonical JSON lines.");

  m.def("write_synthetic", [](const std::string& out_dir, std::uint64_t seed, std::size_t n) {
        synthgen::WorldSpec spec;
        spec.seed = seed;
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        const auto samples = synthgen::generate(spec, n);
        corpus::write_corpus(dir / "corpus.jsonl", samples);
        corpus::write_splits(dir / "splits.json", synthgen::make_splits(samples, seed));
        synthgen::default_templates(synthgen::build_world(spec)).save(dir / "templates.tsv");
        py::dict d;
        d["corpus"] = (dir / "corpus.jsonl").string();
        d["splits"] = (dir / "splits.json").string();
        d["templates"] = (dir / "templates.tsv").string();
        return d;
      }, py::arg("out_dir"), py::arg("seed"), py::arg("n_dialogues"),
      "Writes corpus.jsonl, splits.json and templates.tsv.");

  m.def("parse_plan", [](const std::vector<std::string>& tokens, const std::string& tokenizer) {
        return to_tuples(planner::parse_plan(tokens, corpus::parse_tokenizer_mode(tokenizer)));
      }, py::arg("tokens"), py::arg("tokenizer") = "whitespace");

  m.def("serialize_plan", [](const std::vector<StepTuple>& steps, const std::string& tokenizer) {
        planner::PlanPath p;
        for (const auto& [a, t] : steps) p.steps.push_back({a, t});
        return planner::serialize_plan(p, corpus::parse_tokenizer_mode(tokenizer));
      }, py::arg("steps"), py::arg("tokenizer") = "whitespace");

  m.def("train", [](const std::string& corpus_path, const std::string& splits_path, std::uint64_t seed,
                    const std::string& out, const std::string& planner_json, const std::string& train_json,
                    const std::string& log_path) {
        auto pc = planner::config_from_json(json::parse(planner_json), planner::PlannerConfig::desk_scale());
        auto tc = training::config_from_json(json::parse(train_json));
        tc.seed = seed;
        const auto train_samples = load_split(corpus_path, splits_path, "train");
        const auto dev_samples = load_split(corpus_path, splits_path, "dev");
        auto model = planner::init_model(pc, corpus::build_vocab(train_samples, pc.tokenizer), seed);
        const auto tg = training::make_groups(model, corpus::make_instances(train_samples));
        const auto dg = training::make_groups(model, corpus::make_instances(dev_samples));
        std::ofstream log;
        training::TrainHooks hooks;
        if (!log_path.empty()) {
          log.open(log_path);
          hooks.log = &log;
        }
        training::TrainResult r;
        {
          py::gil_scoped_release release;
          r = training::train(model, tg, dg, tc, hooks);
        }
        training::save_checkpoint(model, out);
        return json{{"checkpoint", out},
                    {"steps", r.total_steps},
                    {"best_epoch", r.best_epoch},
                    {"best_dev_token_accuracy", r.best_dev_token_accuracy}}.dump();
      });

  m.def("evaluate", [](const std::string& checkpoint, const std::string& corpus_path, const std::string& splits_path,
                       const std::string& split, const std::string& templates_path) {
        const auto model = training::load_checkpoint(checkpoint);
        const auto samples = load_split(corpus_path, splits_path, split);
        const auto instances = corpus::make_instances(samples);
        std::optional<guidance::TemplateTable> templates;
        if (!templates_path.empty()) templates = guidance::TemplateTable::load(templates_path);
        auto ev = metrics::evaluate(model, instances, templates ? &*templates : nullptr);
        if (!instances.empty())
          ev.report.values["ppl"] = metrics::planner_perplexity(model, training::make_groups(model, instances));
        return ev.report.to_json().dump();
      });

  m.def("word_f1", &metrics::word_f1, py::arg("cand"), py::arg("ref"));
  m.def("bleu", &metrics::bleu, py::arg("cand"), py::arg("ref"), py::arg("n"), py::arg("smooth") = false);
  m.def("dist", &metrics::dist, py::arg("cands"), py::arg("n"));
  m.def("target_success", &metrics::target_success, py::arg("cands"), py::arg("targets"));
  m.def("knowledge_f1", [](const std::vector<std::string>& c, const std::vector<std::string>& g,
                           const std::vector<std::vector<std::tuple<std::string, std::string, std::string>>>& t) {
        std::vector<std::vector<corpus::KnowledgeTriple>> triples;
        for (const auto& inst : t) {
          triples.emplace_back();
          for (const auto& [s, r, o] : inst) triples.back().push_back({s, r, o});
        }
        return metrics::knowledge_f1(c, g, triples);
      }, py::arg("cands"), py::arg("golds"), py::arg("triples"));

  py::class_<Planner>(m, "Planner")
      .def_static("load", &Planner::load, py::arg("path"))
      .def("save", &Planner::save, py::arg("path"))
      .def_property_readonly("config_json", &Planner::config)
      .def_property_readonly("parameter_count", &Planner::parameter_count)
      .def_property_readonly("vocab", &Planner::vocab)
      .def("plan", &Planner::plan, py::arg("record"), py::arg("turn"),
           "Decode, parse and select the prompt for a system turn of a canonical JSON record.")
      .def("logits", &Planner::logits, py::arg("record"), py::arg("turn"));
}
