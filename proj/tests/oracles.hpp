#pragma once

// Randomised oracle sweeps shared by the unit suites and the acceptance binary.

#include <cstdint>
#include <string>
#include <vector>

namespace atlt::testing {

struct GradcheckResult {
  std::string name;
  double worst = 0.0;  // largest relative error over all seeds and inputs
  int seeds = 0;
};

// Tape gradients of every differentiable primitive against central
// differences (h = 1e-6) at 64-bit.
std::vector<GradcheckResult> primitive_gradchecks(int seeds);

// Same for ce, bsl, margin-bsl, trades, cw-margin and mixup.
std::vector<GradcheckResult> loss_gradchecks(int seeds);

struct AlgebraResult {
  int draws = 0;
  int bsl0_mismatches = 0;         // BSL(tau_b = 0) != CE bitwise
  double uniform_worst = 0.0;      // |BSL(uniform counts) - CE|
  double zero_margin_worst = 0.0;  // |margin-BSL(m = 0) - BSL(s * cos)|
};

AlgebraResult loss_algebra(int draws, std::uint64_t seed);

struct FeasibilityResult {
  std::size_t outputs = 0;
  double worst_excess = 0.0;  // max over coordinates of |x' - x| - eps
  bool in_unit_box = true;
  std::size_t pgd1_mismatches = 0;  // PGD(1 step, step = eps, no start) != FGSM
  std::size_t pgd1_checks = 0;
};

// Each trial draws a batch, labels, attack loss, epsilon and PGD settings for a
// small CNN and records one FGSM and one PGD output.
FeasibilityResult attack_feasibility(int trials, std::uint64_t seed);

}  // namespace atlt::testing
