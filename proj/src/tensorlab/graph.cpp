#include "tcplan/tensorlab/graph.hpp"

#include <atomic>

#include "tcplan/error.hpp"

namespace tcplan::tensorlab {

namespace {
std::atomic<bool> g_checked{true};
}

void set_checked_mode(bool on) noexcept { g_checked.store(on, std::memory_order_relaxed); }
bool checked_mode() noexcept { return g_checked.load(std::memory_order_relaxed); }

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (checked_mode() && !value.all_finite()) throw NumericError("leaf: non-finite value");
  Node n;
  n.op = "leaf";
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(const Tensor& value) {
  if (auto it = param_ids_.find(&value); it != param_ids_.end()) return {this, it->second};
  Node n;
  n.op = "param";
  n.external = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ids_.emplace(&value, id);
  return {this, id};
}

void Graph::alias_param(const Tensor& storage, Var leaf) {
  if (leaf.graph != this) throw DimensionError("alias_param: variable belongs to another graph");
  if (!storage.same_shape(value(leaf.id))) throw DimensionError("alias_param: shape mismatch");
  param_ids_[&storage] = leaf.id;
}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.external != nullptr ? *n.external : n.own;
}

Var Graph::record(std::string op, Tensor value, std::vector<int> inputs, Backward backward) {
  if (checked_mode() && !value.all_finite()) {
    throw NumericError(op + ": non-finite output " + value.shape_string());
  }
  Node n;
  n.op = std::move(op);
  n.own = std::move(value);
  bool needs = false;
  for (int in : inputs) needs = needs || nodes_[static_cast<std::size_t>(in)].requires_grad;
  n.requires_grad = needs && record_;
  if (n.requires_grad) n.backward = std::move(backward);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Graph::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_allocated) {
    const Tensor& v = n.external != nullptr ? *n.external : n.own;
    n.grad = Tensor(v.rows(), v.cols(), 0.0);
    n.grad_allocated = true;
  }
  return n.grad;
}

bool Graph::has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_allocated; }

const Tensor& Graph::grad(int id) { return grad_ref(id); }
const Tensor& Graph::grad(Var v) { return grad_ref(v.id); }

void Graph::zero_grad() {
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.grad_allocated = false;
  }
}

void Graph::backward(Var out) {
  const Tensor& v = value(out);
  if (v.size() != 1) throw DimensionError("backward: output must be 1x1, got " + v.shape_string());
  backward(out, Tensor::scalar(1.0));
}

void Graph::backward(Var out, const Tensor& seed) {
  if (out.graph != this) throw DimensionError("backward: variable belongs to another graph");
  if (!record_) throw EvaluationError("backward: graph was built without recording");
  Tensor& g = grad_ref(out.id);
  if (!g.same_shape(seed)) throw DimensionError("backward: seed shape " + seed.shape_string());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad_allocated) n.backward(*this, id);
  }
}

}  // namespace tcplan::tensorlab
