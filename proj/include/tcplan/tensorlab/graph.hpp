#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <deque>
#include <unordered_map>
#include <vector>

#include "tcplan/tensorlab/tensor.hpp"

namespace tcplan::tensorlab {

class Graph;

// Handle to a node recorded in a Graph. Cheap to copy.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const noexcept { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// NaN/Inf guards at op boundaries. On by default.
void set_checked_mode(bool on) noexcept;
bool checked_mode() noexcept;

// Tape of op records in creation order. Creation order is a topological
// order, so backward walks the records in reverse and is deterministic.
//
// Leaves created with param() reference caller-owned storage and never write
// to it; gradients live in the graph. Several graphs may therefore share one
// set of parameters.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  // record=false skips saving backward closures (inference).
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);
  // Leaf over external storage; the same tensor maps to one node per graph.
  Var param(const Tensor& value);
  // Makes later param(storage) calls return `leaf` instead.
  void alias_param(const Tensor& storage, Var leaf);

  const Tensor& value(int id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  // Records an op output. The closure is kept only when recording and at
  // least one input requires a gradient.
  Var record(std::string op, Tensor value, std::vector<int> inputs, Backward backward);

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);
  // Seeds with an explicit upstream gradient.
  void backward(Var out, const Tensor& seed);
  void zero_grad();

  // Gradient of a node; zero tensor when nothing flowed into it.
  const Tensor& grad(Var v);
  const Tensor& grad(int id);
  // Accumulation target used by backward closures.
  Tensor& grad_ref(int id);
  bool has_grad(int id) const;

 private:
  struct Node {
    std::string op;
    Tensor own;
    const Tensor* external = nullptr;
    Tensor grad;
    bool grad_allocated = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    Backward backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, int> param_ids_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

}  // namespace tcplan::tensorlab
