#include "tcplan/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tcplan/error.hpp"

namespace tcplan::metrics {

namespace {

std::map<Tokens, std::size_t> ngram_counts(const Tokens& t, int n) {
  std::map<Tokens, std::size_t> out;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + len)];
  return out;
}

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

PlanAccuracy plan_accuracy(const std::vector<PlanStep>& pred, const std::vector<GoldWindow>& gold) {
  if (pred.empty()) throw InputError("plan_accuracy: no predictions");
  if (pred.size() != gold.size()) throw InputError("plan_accuracy: predictions and gold differ in length");
  std::size_t a = 0, t = 0, ba = 0, bt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& g = gold[i];
    const bool hit_a = pred[i].action == g.current.action, hit_t = pred[i].topic == g.current.topic;
    a += hit_a;
    t += hit_t;
    ba += hit_a || (g.prev && g.prev->action == pred[i].action) || (g.next && g.next->action == pred[i].action);
    bt += hit_t || (g.prev && g.prev->topic == pred[i].topic) || (g.next && g.next->topic == pred[i].topic);
  }
  const std::size_t n = pred.size();
  return {ratio(a, n), ratio(t, n), ratio(ba, n), ratio(bt, n), n};
}

double word_f1(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const auto c = ngram_counts(cand, 1), r = ngram_counts(ref, 1);
  std::size_t overlap = 0;
  for (const auto& [gram, k] : c)
    if (auto it = r.find(gram); it != r.end()) overlap += std::min(k, it->second);
  if (overlap == 0) return 0.0;
  const double p = ratio(overlap, cand.size()), rec = ratio(overlap, ref.size());
  return 2.0 * p * rec / (p + rec);
}

double bleu(const Tokens& cand, const Tokens& ref, int n, bool smooth) {
  if (n < 1) throw InputError("bleu: order must be positive");
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto c = ngram_counts(cand, k), r = ngram_counts(ref, k);
    std::size_t clipped = 0, total = 0;
    for (const auto& [gram, cnt] : c) {
      total += cnt;
      if (auto it = r.find(gram); it != r.end()) clipped += std::min(cnt, it->second);
    }
    double num = static_cast<double>(clipped), den = static_cast<double>(total);
    if (smooth && k > 1) num += 1.0, den += 1.0;
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  return bp * std::exp(log_sum / n);
}

double corpus_bleu(const std::vector<Tokens>& cands, const std::vector<Tokens>& refs, int n, bool smooth) {
  if (cands.size() != refs.size()) throw InputError("corpus_bleu: candidates and references differ in length");
  if (cands.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) s += bleu(cands[i], refs[i], n, smooth);
  return s / static_cast<double>(cands.size());
}

double dist(const std::vector<Tokens>& cands, int n) {
  if (n < 1) throw InputError("dist: order must be positive");
  std::set<Tokens> unique;
  std::size_t total = 0;
  for (const auto& c : cands)
    for (const auto& [gram, cnt] : ngram_counts(c, n)) {
      unique.insert(gram);
      total += cnt;
    }
  return ratio(unique.size(), total);
}

double knowledge_f1(const std::vector<std::string>& cands, const std::vector<std::string>& golds,
                    const std::vector<std::vector<KnowledgeTriple>>& triples) {
  if (cands.size() != golds.size() || cands.size() != triples.size()) {
    throw InputError("knowledge_f1: inputs differ in length");
  }
  std::size_t both = 0, pred = 0, gold = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::set<std::string> strings;
    for (const auto& t : triples[i]) {
      if (!t.subject.empty()) strings.insert(t.subject);
      if (!t.object.empty()) strings.insert(t.object);
    }
    for (const auto& s : strings) {
      const bool in_c = cands[i].find(s) != std::string::npos, in_g = golds[i].find(s) != std::string::npos;
      pred += in_c;
      gold += in_g;
      both += in_c && in_g;
    }
  }
  if (both == 0) return 0.0;
  const double p = ratio(both, pred), r = ratio(both, gold);
  return 2.0 * p * r / (p + r);
}

std::optional<double> target_success(const std::vector<std::string>& cands, const std::vector<std::string>& targets) {
  if (cands.size() != targets.size()) throw InputError("target_success: inputs differ in length");
  if (cands.empty()) return std::nullopt;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) hit += cands[i].find(targets[i]) != std::string::npos;
  return ratio(hit, cands.size());
}

json MetricReport::to_json() const {
  json j = json::object();
  j["report_version"] = kReportVersion;
  for (const auto& [k, v] : values) j[k] = v;
  for (const auto& [k, v] : notes) j[k] = v;
  return j;
}

}  // namespace tcplan::metrics
