#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "atlt/core/tape.hpp"

namespace atlt::losses {

using Labels = std::vector<std::size_t>;

/// Examples per class. All counts are at least one.
class ClassCounts {
 public:
  explicit ClassCounts(std::vector<std::int64_t> counts);

  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }
  std::int64_t operator[](std::size_t i) const { return counts_[i]; }
  std::int64_t n_min() const { return n_min_; }
  std::int64_t n_max() const { return n_max_; }

  // tau * ln(n_i), the balanced-softmax logit shift.
  std::vector<double> log_prior(double tau) const;

  friend bool operator==(const ClassCounts& a, const ClassCounts& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t n_min_ = 0;
  std::int64_t n_max_ = 0;
};

struct LossConfig {
  double tau_b = 1.0;  // balanced-softmax strength
  double tau_m = 0.0;  // class-aware margin trend
  double m0 = 0.0;     // uniform margin
  double scale = 10.0; // cosine scale s
  double beta = 6.0;   // TRADES weight

  void validate() const;
};

// Loss ladder: AT, AT-BSL, AT-BSL-Cos, AT-BSL-Cos-TRADES and the full RoBal
// combination (cosine head, BSL, class-aware margin, TRADES).
enum class Ladder { At, AtBsl, AtBslCos, AtBslCosTrades, RoBal };

std::string ladder_name(Ladder row);
Ladder parse_ladder(const std::string& name);
bool ladder_uses_cosine(Ladder row);
bool ladder_uses_trades(Ladder row);
// Per-row defaults used for CIFAR-10-LT in the RoBal component study.
LossConfig ladder_defaults(Ladder row);

template <typename T>
using BaseLoss = std::function<Var<T>(Var<T> logits, const Labels& labels)>;

// Mean over the batch of -log softmax(logits)_y, via log-sum-exp.
template <typename T>
Var<T> cross_entropy(Var<T> logits, const Labels& labels);

// Cross-entropy over z_i + tau_b * ln(n_i).
template <typename T>
Var<T> balanced_softmax_loss(Var<T> logits, const Labels& labels, const ClassCounts& counts, double tau_b);

// m_i = (tau_m / s) * ln(n_i / n_min) + m0.
std::vector<double> class_aware_margin(const ClassCounts& counts, double tau_m, double scale, double m0);

// Balanced softmax over s*cos(theta) with the true-class logit lowered by s*m_y.
template <typename T>
Var<T> margin_bsl_loss(Var<T> cosine, const Labels& labels, const ClassCounts& counts,
                       const std::vector<double>& margins, double scale, double tau_b);

// Mean over rows of KL(softmax(p_logits) || softmax(q_logits)).
template <typename T>
Var<T> kl_divergence(Var<T> p_logits, Var<T> q_logits);

// base(adv, y) + beta * KL(softmax(adv) || softmax(clean)).
template <typename T>
Var<T> trades_objective(Var<T> adv_logits, Var<T> clean_logits, const Labels& labels, double beta,
                        const BaseLoss<T>& base);

// lambda * base(logits, y_a) + (1 - lambda) * base(logits, y_b).
template <typename T>
Var<T> mixup_loss(Var<T> logits, const Labels& labels_a, const Labels& labels_b, double lambda,
                  const BaseLoss<T>& base);

// Throws DataError unless every label is in [0, num_classes) and the batch
// size matches.
void check_labels(const Labels& labels, std::size_t batch, std::size_t num_classes);

}  // namespace atlt::losses
