#pragma once

// Brute-force metric definitions: n-grams as joined strings, counts by linear
// scans. Deliberately shares no code with tcplan::metrics.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<std::string> grams(const Tokens& t, int n) {
  std::vector<std::string> out;
  for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
    std::string s;
    for (int k = 0; k < n; ++k) s += t[i + k] + '\x1f';
    out.push_back(s);
  }
  return out;
}

inline long count(const std::vector<std::string>& v, const std::string& x) {
  return std::count(v.begin(), v.end(), x);
}

inline double word_f1(const Tokens& c, const Tokens& r) {
  if (c.empty() || r.empty()) return 0.0;
  // Greedy one-to-one matching of equal tokens.
  std::vector<bool> used(r.size(), false);
  double m = 0;
  for (const auto& w : c)
    for (std::size_t j = 0; j < r.size(); ++j)
      if (!used[j] && r[j] == w) {
        used[j] = true;
        ++m;
        break;
      }
  if (m == 0) return 0.0;
  const double p = m / c.size(), q = m / r.size();
  return 2 * p * q / (p + q);
}

inline double bleu(const Tokens& c, const Tokens& r, int n, bool smooth) {
  if (c.empty()) return 0.0;
  double prod = 1.0;
  for (int k = 1; k <= n; ++k) {
    const auto cg = grams(c, k), rg = grams(r, k);
    double hit = 0;
    std::vector<std::string> seen;
    for (const auto& g : cg) {
      if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
      seen.push_back(g);
      hit += std::min(count(cg, g), count(rg, g));
    }
    double den = static_cast<double>(cg.size());
    if (smooth && k > 1) hit += 1, den += 1;
    if (hit == 0 || den == 0) return 0.0;
    prod *= hit / den;
  }
  const double lc = static_cast<double>(c.size()), lr = static_cast<double>(r.size());
  const double bp = lc >= lr ? 1.0 : std::exp(1.0 - lr / lc);
  return bp * std::pow(prod, 1.0 / n);
}

inline double dist(const std::vector<Tokens>& cs, int n) {
  std::vector<std::string> all;
  for (const auto& c : cs)
    for (const auto& g : grams(c, n)) all.push_back(g);
  if (all.empty()) return 0.0;
  std::vector<std::string> uniq;
  for (const auto& g : all)
    if (std::find(uniq.begin(), uniq.end(), g) == uniq.end()) uniq.push_back(g);
  return static_cast<double>(uniq.size()) / all.size();
}

struct Step {
  std::string action, topic;
};

// Accuracies as {acc_action, acc_topic, bi_action, bi_topic}; window holds
// prev/current/next with empty action meaning absent.
inline std::vector<double> plan_accuracy(const std::vector<Step>& pred, const std::vector<std::vector<Step>>& windows) {
  std::vector<double> hits(4, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& w = windows[i];
    if (pred[i].action == w[1].action) hits[0] += 1;
    if (pred[i].topic == w[1].topic) hits[1] += 1;
    bool ba = false, bt = false;
    for (const auto& s : w) {
      if (s.action.empty()) continue;
      ba = ba || s.action == pred[i].action;
      bt = bt || s.topic == pred[i].topic;
    }
    hits[2] += ba;
    hits[3] += bt;
  }
  for (double& h : hits) h /= static_cast<double>(pred.size());
  return hits;
}

inline bool contains(const std::string& hay, const std::string& needle) {
  if (needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (hay.compare(i, needle.size(), needle) == 0) return true;
  return false;
}

// Entity strings as a flat list of (subject, object) pairs per instance.
inline double knowledge_f1(const std::vector<std::string>& cands, const std::vector<std::string>& golds,
                           const std::vector<std::vector<std::string>>& entities) {
  double tp = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<std::string> uniq;
    for (const auto& e : entities[i])
      if (!e.empty() && std::find(uniq.begin(), uniq.end(), e) == uniq.end()) uniq.push_back(e);
    for (const auto& e : uniq) {
      const bool c = contains(cands[i], e), g = contains(golds[i], e);
      np += c;
      ng += g;
      tp += c && g;
    }
  }
  if (tp == 0) return 0.0;
  const double p = tp / np, r = tp / ng;
  return 2 * p * r / (p + r);
}

inline double target_success(const std::vector<std::string>& cands, const std::vector<std::string>& targets) {
  double hit = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) hit += contains(cands[i], targets[i]);
  return hit / static_cast<double>(cands.size());
}

}  // namespace oracle
