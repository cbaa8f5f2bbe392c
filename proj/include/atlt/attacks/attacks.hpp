#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "atlt/core/tape.hpp"
#include "atlt/losses/losses.hpp"
#include "atlt/nets/model.hpp"

namespace atlt::attacks {

enum class AttackLoss { CrossEntropy, Balanced, CwMargin };

std::string attack_loss_name(AttackLoss kind);
AttackLoss parse_attack_loss(const std::string& name);

/// l-infinity attack configuration on the [0,1] pixel scale.
struct AttackSpec {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int steps = 10;
  bool random_start = true;
  AttackLoss loss = AttackLoss::CrossEntropy;
  double kappa = 0.0;  // CW confidence, CwMargin only

  // 0 < step_size, 0 < epsilon <= 1, steps >= 1.
  void validate() const;
};

// Scalar loss that the attack ascends, evaluated at input `x` on `tape`.
template <typename T>
using Objective = std::function<Var<T>(Tape<T>& tape, Var<T> x)>;

// Clamp into the epsilon ball around `origin`, then into [0,1].
template <typename T>
Tensor<T> project_linf_clip(const Tensor<T>& x_adv, const Tensor<T>& origin, double epsilon);

template <typename T>
Tensor<T> input_gradient(const Objective<T>& objective, const Tensor<T>& x);

// clip(x + epsilon * sign(grad)), with sign(0) = 0.
template <typename T>
Tensor<T> fgsm(const Objective<T>& objective, const Tensor<T>& x, double epsilon);

// Iterated signed-gradient ascent with projection after every step. The random
// start for batch row i draws from derive_seed(seed, "pgd-start", i).
template <typename T>
Tensor<T> pgd(const Objective<T>& objective, const Tensor<T>& x, const AttackSpec& spec, std::uint64_t seed);

// Mean over the batch of -max(z_y - max_{i != y} z_i, -kappa).
template <typename T>
Var<T> cw_margin_loss(Var<T> logits, const losses::Labels& labels, double kappa);

// Attack loss on a model's logits. `counts` is required for AttackLoss::Balanced.
template <typename T>
Objective<T> model_objective(const nets::Model<T>& model, AttackLoss kind, const losses::Labels& labels,
                             const losses::ClassCounts* counts = nullptr, double tau_b = 1.0, double kappa = 0.0);

}  // namespace atlt::attacks
