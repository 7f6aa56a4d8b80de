#include "tcplan/tensorlab/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "tcplan/error.hpp"

namespace tcplan::tensorlab {

namespace {

double evaluate(const Objective& f, const std::vector<NamedTensor>& params) {
  Graph g(false);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(g.leaf(p.value, true));
  const Var out = f(g, vars);
  const Tensor& v = g.value(out);
  if (v.size() != 1) throw EvaluationError("grad_check: objective is not scalar " + v.shape_string());
  if (!std::isfinite(v[0])) throw EvaluationError("grad_check: objective is not finite");
  return v[0];
}

}  // namespace

GradCheckReport grad_check(const Objective& f, std::vector<NamedTensor> params, double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-3)) throw EvaluationError("grad_check: eps outside [1e-5, 1e-3]");

  std::vector<Tensor> analytic;
  {
    Graph g(true);
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(g.leaf(p.value, true));
    const Var out = f(g, vars);
    const Tensor& v = g.value(out);
    if (v.size() != 1) throw EvaluationError("grad_check: objective is not scalar " + v.shape_string());
    if (!std::isfinite(v[0])) throw EvaluationError("grad_check: objective is not finite");
    g.backward(out);
    for (const Var& var : vars) analytic.push_back(g.grad(var));
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi].value;
    GradCheckEntry entry;
    entry.name = params[pi].name;
    entry.count = value.size();
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double plus = evaluate(f, params);
      value[i] = saved - eps;
      const double minus = evaluate(f, params);
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      diff_sq += (a - numeric) * (a - numeric);
      a_sq += a * a;
      n_sq += numeric * numeric;
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
    }
    entry.analytic_norm = std::sqrt(a_sq);
    const double denom = std::sqrt(a_sq) + std::sqrt(n_sq);
    // Floor keeps round-off on vanishing gradients from reading as 100% error.
    entry.rel_error = std::sqrt(diff_sq) / std::max(denom, 1e-8);
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace tcplan::tensorlab
