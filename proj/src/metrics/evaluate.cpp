#include "tcplan/metrics/evaluate.hpp"

#include <cmath>

#include "tcplan/corpus/tokenizer.hpp"
#include "tcplan/error.hpp"

namespace tcplan::metrics {

Evaluation evaluate(const planner::Model& model, const std::vector<corpus::Instance>& instances,
                    const guidance::TemplateTable* templates, const EvalOptions& opts) {
  Evaluation ev;
  const auto mode = model.config.tokenizer;
  std::vector<PlanStep> pred;
  std::vector<GoldWindow> gold;
  std::vector<Tokens> cand_tokens, ref_tokens;
  std::vector<std::string> cands, refs, target_cands, target_topics;
  std::vector<std::vector<KnowledgeTriple>> triples;
  std::size_t parsed = 0, fallbacks = 0, first_match = 0, unrealizable = 0;

  for (const auto& inst : instances) {
    const auto& sample = *inst.sample;
    InstanceOutcome out;
    out.sample_id = sample.id;
    out.turn = inst.turn;
    out.gold = inst.gold;
    out.target = inst.target;
    out.target_turn = inst.target_turn;
    const auto input = encoders::make_encoder_input(sample, inst.turn, inst.target, model.vocab, model.config);
    out.decoded = planner::greedy_decode(model, input).tokens;
    out.choice = guidance::choose_prompt(out.decoded, inst.target, mode, opts.policy);
    parsed += out.choice.parsed;
    fallbacks += out.choice.fallback;
    first_match += !out.choice.path.steps.empty() && out.choice.path.steps.front() == inst.target;
    pred.push_back(out.choice.step);
    gold.push_back({inst.gold_prev, inst.gold, inst.gold_next});

    if (templates != nullptr) {
      const PlanStep& step = out.choice.step;
      if (templates->covers(step.action)) {
        const auto extracted = guidance::extract_knowledge(step.topic, step.action, sample.knowledge, opts.extract);
        const std::vector<corpus::Turn> history(sample.turns.begin(), sample.turns.begin() + inst.turn);
        const auto gen_input = guidance::build_generation_input(sample.profile, extracted, history, step.action);
        out.utterance = guidance::realize(gen_input, step, extracted, *templates);
      } else {
        ++unrealizable;
      }
      const std::string& ref = sample.turns[inst.turn].utterance;
      cands.push_back(out.utterance);
      refs.push_back(ref);
      cand_tokens.push_back(corpus::tokenize(out.utterance, mode));
      ref_tokens.push_back(corpus::tokenize(ref, mode));
      triples.push_back(sample.knowledge);
      if (inst.target_turn) {
        target_cands.push_back(out.utterance);
        target_topics.push_back(inst.target.topic);
      }
    }
    ev.outcomes.push_back(std::move(out));
  }

  auto& r = ev.report;
  const double n = static_cast<double>(instances.size());
  r.values["instances"] = n;
  if (!instances.empty()) {
    const auto acc = plan_accuracy(pred, gold);
    r.values["acc_action"] = acc.acc_action;
    r.values["acc_topic"] = acc.acc_topic;
    r.values["bi_acc_action"] = acc.bi_acc_action;
    r.values["bi_acc_topic"] = acc.bi_acc_topic;
    r.values["parse_rate"] = static_cast<double>(parsed) / n;
    r.values["fallback_rate"] = static_cast<double>(fallbacks) / n;
    r.values["first_pair_match"] = static_cast<double>(first_match) / n;
  }
  if (templates != nullptr && !instances.empty()) {
    double f1 = 0.0;
    for (std::size_t i = 0; i < cand_tokens.size(); ++i) f1 += word_f1(cand_tokens[i], ref_tokens[i]);
    r.values["word_f1"] = f1 / n;
    r.values["bleu1"] = corpus_bleu(cand_tokens, ref_tokens, 1, opts.smooth_bleu);
    r.values["bleu2"] = corpus_bleu(cand_tokens, ref_tokens, 2, opts.smooth_bleu);
    r.values["dist1"] = dist(cand_tokens, 1);
    r.values["dist2"] = dist(cand_tokens, 2);
    r.values["knowledge_f1"] = knowledge_f1(cands, refs, triples);
    r.values["target_turns"] = static_cast<double>(target_cands.size());
    r.set("target_success", target_success(target_cands, target_topics));
    r.values["unrealizable_rate"] = static_cast<double>(unrealizable) / n;
    r.notes["knowledge_f1_definition"] = "entity-set";
    r.notes["bleu_definition"] = opts.smooth_bleu ? "sentence-mean, add-one smoothing" : "sentence-mean, unsmoothed";
  }
  return ev;
}

double planner_perplexity(const planner::Model& model, const std::vector<training::ExampleGroup>& groups) {
  std::vector<const training::ExampleGroup*> all;
  for (const auto& g : groups) all.push_back(&g);
  return std::exp(training::batch_loss(model, all, nullptr));
}

}  // namespace tcplan::metrics
