#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tcplan/tensorlab/graph.hpp"

namespace tcplan::tensorlab {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Scalar objective over leaves created from the named parameters, in order.
using Objective = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double analytic_norm = 0.0;
  double max_abs_error = 0.0;
  // ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-8).
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;

  bool passed(double tol) const { return max_rel_error < tol; }
};

// Compares backward() against central differences on every element.
// eps must lie in [1e-5, 1e-3]; a non-finite objective raises EvaluationError.
GradCheckReport grad_check(const Objective& f, std::vector<NamedTensor> params, double eps = 1e-5);

}  // namespace tcplan::tensorlab
