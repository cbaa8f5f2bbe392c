#include "atlt/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"

namespace atlt::attacks {

std::string attack_loss_name(AttackLoss kind) {
  switch (kind) {
    case AttackLoss::CrossEntropy: return "ce";
    case AttackLoss::Balanced: return "bsl";
    case AttackLoss::CwMargin: return "cw";
  }
  return "unknown";
}

AttackLoss parse_attack_loss(const std::string& name) {
  if (name == "ce") return AttackLoss::CrossEntropy;
  if (name == "bsl") return AttackLoss::Balanced;
  if (name == "cw") return AttackLoss::CwMargin;
  throw ConfigError("unknown attack loss '" + name + "' (expected ce, bsl or cw)");
}

void AttackSpec::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("attack epsilon must lie in (0,1]");
  if (!(step_size > 0.0)) throw ConfigError("attack step size must be positive");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (!(kappa >= 0.0)) throw ConfigError("CW kappa must be >= 0");
}

template <typename T>
Tensor<T> project_linf_clip(const Tensor<T>& x_adv, const Tensor<T>& origin, double epsilon) {
  if (x_adv.shape() != origin.shape()) {
    throw ShapeError("project_linf_clip: shape mismatch " + shape_str(x_adv.shape()) + " vs " + shape_str(origin.shape()));
  }
  const T eps = static_cast<T>(epsilon);
  Tensor<T> out = x_adv;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    T v = std::clamp(out[i], origin[i] - eps, origin[i] + eps);
    out[i] = std::clamp(v, T(0), T(1));
  }
  return out;
}

template <typename T>
Tensor<T> input_gradient(const Objective<T>& objective, const Tensor<T>& x) {
  Tape<T> tape;
  auto xv = tape.leaf(x, true);
  auto loss = objective(tape, xv);
  tape.backward(loss);
  return tape.grad(xv);
}

namespace {

template <typename T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

template <typename T>
Tensor<T> signed_step(const Tensor<T>& x, const Tensor<T>& grad, double step) {
  const T s = static_cast<T>(step);
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] + s * sign(grad[i]);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> fgsm(const Objective<T>& objective, const Tensor<T>& x, double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("fgsm epsilon must be >= 0");
  const auto g = input_gradient(objective, x);
  return project_linf_clip(signed_step(x, g, epsilon), x, epsilon);
}

template <typename T>
Tensor<T> pgd(const Objective<T>& objective, const Tensor<T>& x, const AttackSpec& spec, std::uint64_t seed) {
  spec.validate();
  Tensor<T> adv = x;
  if (spec.random_start) {
    const std::size_t rows = x.rank() > 0 ? x.dim(0) : 1;
    const std::size_t per_row = x.numel() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
      Rng rng(derive_seed(seed, "pgd-start", r));
      for (std::size_t i = 0; i < per_row; ++i) {
        adv[r * per_row + i] += static_cast<T>(rng.uniform(-spec.epsilon, spec.epsilon));
      }
    }
    adv = project_linf_clip(adv, x, spec.epsilon);
  }
  for (int step = 0; step < spec.steps; ++step) {
    const auto g = input_gradient(objective, adv);
    adv = project_linf_clip(signed_step(adv, g, spec.step_size), x, spec.epsilon);
  }
  return adv;
}

template <typename T>
Var<T> cw_margin_loss(Var<T> logits, const losses::Labels& labels, double kappa) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw ShapeError("cw_margin_loss expects (N,C) logits, got " + shape_str(s));
  if (s[1] < 2) throw ShapeError("cw_margin_loss needs at least 2 classes");
  losses::check_labels(labels, s[0], s[1]);
  auto gap = ops::sub(ops::gather_rows(logits, labels), ops::gather_max_other(logits, labels));
  return ops::scale(ops::mean(ops::clamp_min(gap, -kappa)), -1.0);
}

template <typename T>
Objective<T> model_objective(const nets::Model<T>& model, AttackLoss kind, const losses::Labels& labels,
                             const losses::ClassCounts* counts, double tau_b, double kappa) {
  if (kind == AttackLoss::Balanced && counts == nullptr) throw ConfigError("balanced attack loss needs class counts");
  std::optional<losses::ClassCounts> owned;
  if (counts) owned = *counts;
  return [&model, kind, labels, owned, tau_b, kappa](Tape<T>& tape, Var<T> x) {
    auto logits = model.forward(tape, x, false).logits;
    switch (kind) {
      case AttackLoss::CrossEntropy: return losses::cross_entropy(logits, labels);
      case AttackLoss::Balanced: return losses::balanced_softmax_loss(logits, labels, *owned, tau_b);
      case AttackLoss::CwMargin: return cw_margin_loss(logits, labels, kappa);
    }
    return losses::cross_entropy(logits, labels);
  };
}

#define ATLT_INSTANTIATE(T)                                                                              \
  template Tensor<T> project_linf_clip(const Tensor<T>&, const Tensor<T>&, double);                     \
  template Tensor<T> input_gradient(const Objective<T>&, const Tensor<T>&);                             \
  template Tensor<T> fgsm(const Objective<T>&, const Tensor<T>&, double);                               \
  template Tensor<T> pgd(const Objective<T>&, const Tensor<T>&, const AttackSpec&, std::uint64_t);      \
  template Var<T> cw_margin_loss(Var<T>, const losses::Labels&, double);                                \
  template Objective<T> model_objective(const nets::Model<T>&, AttackLoss, const losses::Labels&,       \
                                        const losses::ClassCounts*, double, double);

ATLT_INSTANTIATE(float)
ATLT_INSTANTIATE(double)

#undef ATLT_INSTANTIATE

}  // namespace atlt::attacks
