#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcplan/tensorlab/tensor.hpp"

namespace tcplan::planner {

using tensorlab::Tensor;

// Named parameter store. Tensors keep stable addresses, so graphs may bind
// them with Graph::param. Iteration follows registration order.
class Weights {
 public:
  Tensor& add(std::string name, std::size_t rows, std::size_t cols, double fill = 0.0);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  std::size_t parameter_count() const;

  // Rounds every value to the nearest 32-bit float.
  void round_to_float();

  friend bool operator==(const Weights& a, const Weights& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::deque<Tensor> tensors_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tcplan::planner
