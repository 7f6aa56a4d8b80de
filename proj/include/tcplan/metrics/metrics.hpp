#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcplan/corpus/types.hpp"
#include "tcplan/json_fields.hpp"

namespace tcplan::metrics {

using corpus::KnowledgeTriple;
using corpus::PlanStep;
using Tokens = std::vector<std::string>;

// Gold steps of the previous, current and following system turns.
struct GoldWindow {
  std::optional<PlanStep> prev;
  PlanStep current;
  std::optional<PlanStep> next;
};

struct PlanAccuracy {
  double acc_action = 0.0;
  double acc_topic = 0.0;
  double bi_acc_action = 0.0;
  double bi_acc_topic = 0.0;
  std::size_t count = 0;
};

// Empty input or a length mismatch raises InputError.
PlanAccuracy plan_accuracy(const std::vector<PlanStep>& pred, const std::vector<GoldWindow>& gold);

// Multiset-overlap F1; 0 when either side is empty.
double word_f1(const Tokens& cand, const Tokens& ref);

// Sentence BLEU-n: geometric mean of clipped 1..n-gram precisions times
// exp(min(0, 1 - |ref|/|cand|)). Without smoothing any zero precision gives
// 0; smoothing adds one to numerator and denominator for orders above 1.
double bleu(const Tokens& cand, const Tokens& ref, int n, bool smooth = false);
// Mean of sentence scores.
double corpus_bleu(const std::vector<Tokens>& cands, const std::vector<Tokens>& refs, int n, bool smooth = false);

// Distinct n-grams over the corpus divided by all n-grams; 0 with none.
double dist(const std::vector<Tokens>& cands, int n);

// Knowledge strings of an instance: subjects and objects of its triples.
// Micro set-F1 over instances of the strings found (as substrings) in the
// candidate versus the gold utterance.
double knowledge_f1(const std::vector<std::string>& cands, const std::vector<std::string>& golds,
                    const std::vector<std::vector<KnowledgeTriple>>& triples);

// Share of candidates containing their target topic verbatim; absent when
// there are no instances.
std::optional<double> target_success(const std::vector<std::string>& cands, const std::vector<std::string>& targets);

inline constexpr int kReportVersion = 1;

// Flat name -> value report. Absent metrics are omitted, not zeroed.
struct MetricReport {
  std::map<std::string, double> values;
  std::map<std::string, std::string> notes;

  void set(const std::string& name, std::optional<double> v) {
    if (v) values[name] = *v;
  }
  json to_json() const;
};

}  // namespace tcplan::metrics
