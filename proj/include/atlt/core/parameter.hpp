#pragma once

#include <string>

#include "atlt/core/tensor.hpp"

namespace atlt {

// Trainable tensor with its gradient accumulator and momentum buffer, all the
// same shape. Frozen parameters keep their value through optimizer steps.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> momentum;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), momentum(value.shape()), trainable(train) {}

  void zero_grad() {
    for (auto& g : grad.data()) g = T(0);
  }
};

}  // namespace atlt
