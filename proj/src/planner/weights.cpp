#include "tcplan/planner/weights.hpp"

#include "tcplan/error.hpp"

namespace tcplan::planner {

Tensor& Weights::add(std::string name, std::size_t rows, std::size_t cols, double fill) {
  if (index_.count(name) != 0) throw ConfigError("duplicate parameter '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  return tensors_.emplace_back(rows, cols, fill);
}

bool Weights::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

Tensor& Weights::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw IndexError("no parameter named '" + std::string(name) + "'");
  return tensors_[it->second];
}

const Tensor& Weights::at(std::string_view name) const { return const_cast<Weights*>(this)->at(name); }

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void Weights::round_to_float() {
  for (auto& t : tensors_)
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace tcplan::planner
