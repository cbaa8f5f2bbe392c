#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "atlt/core/tensor.hpp"

namespace atlt {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate of `point`. The function is evaluated 2 * numel times.
template <typename T>
Tensor<T> finite_difference_gradient(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& point,
                                     T step) {
  Tensor<T> grad(point.shape());
  Tensor<T> probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + step;
    const T up = f(probe);
    probe[i] = orig - step;
    const T down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (T(2) * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor). The floor keeps all-zero
// gradients from dividing by zero.
template <typename T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-8) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max({scale, std::abs(static_cast<double>(a[i])), std::abs(static_cast<double>(b[i]))});
  }
  return diff / scale;
}

}  // namespace atlt
