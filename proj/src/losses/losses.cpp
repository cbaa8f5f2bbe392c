#include "atlt/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "atlt/core/errors.hpp"

namespace atlt::losses {

ClassCounts::ClassCounts(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw ConfigError("class counts must not be empty");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] < 1) {
      throw ConfigError("class " + std::to_string(i) + " has count " + std::to_string(counts_[i]) + "; every class needs >= 1 example");
    }
  }
  n_min_ = *std::min_element(counts_.begin(), counts_.end());
  n_max_ = *std::max_element(counts_.begin(), counts_.end());
}

std::vector<double> ClassCounts::log_prior(double tau) const {
  std::vector<double> out(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) out[i] = tau * std::log(static_cast<double>(counts_[i]));
  return out;
}

void LossConfig::validate() const {
  const auto finite_nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string(name) + " must be finite and >= 0");
  };
  finite_nonneg(tau_b, "tau_b");
  finite_nonneg(tau_m, "tau_m");
  finite_nonneg(m0, "m0");
  finite_nonneg(beta, "beta");
  if (!std::isfinite(scale) || scale <= 0.0) throw ConfigError("scale must be finite and > 0");
}

std::string ladder_name(Ladder row) {
  switch (row) {
    case Ladder::At: return "at";
    case Ladder::AtBsl: return "at_bsl";
    case Ladder::AtBslCos: return "at_bsl_cos";
    case Ladder::AtBslCosTrades: return "at_bsl_cos_trades";
    case Ladder::RoBal: return "robal";
  }
  return "unknown";
}

Ladder parse_ladder(const std::string& name) {
  for (auto row : {Ladder::At, Ladder::AtBsl, Ladder::AtBslCos, Ladder::AtBslCosTrades, Ladder::RoBal}) {
    if (ladder_name(row) == name) return row;
  }
  throw ConfigError("unknown loss ladder row '" + name + "'");
}

bool ladder_uses_cosine(Ladder row) { return row != Ladder::At && row != Ladder::AtBsl; }

bool ladder_uses_trades(Ladder row) { return row == Ladder::AtBslCosTrades || row == Ladder::RoBal; }

LossConfig ladder_defaults(Ladder row) {
  LossConfig c;
  switch (row) {
    case Ladder::At: c = {0.0, 0.0, 0.0, 1.0, 6.0}; break;
    case Ladder::AtBsl: c = {1.0, 0.0, 0.0, 1.0, 6.0}; break;
    case Ladder::AtBslCos: c = {1.0, 0.0, 0.1, 10.0, 6.0}; break;
    case Ladder::AtBslCosTrades: c = {1.5, 0.0, 0.1, 10.0, 6.0}; break;
    case Ladder::RoBal: c = {1.5, 0.3, 0.1, 10.0, 6.0}; break;
  }
  return c;
}

void check_labels(const Labels& labels, std::size_t batch, std::size_t num_classes) {
  if (labels.size() != batch) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match batch " + std::to_string(batch));
  }
  for (auto y : labels) {
    if (y >= num_classes) throw DataError("label " + std::to_string(y) + " out of range [0," + std::to_string(num_classes) + ")");
  }
}

namespace {

template <typename T>
void check_logits(Var<T> logits, const Labels& labels) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw ShapeError("loss expects (N,C) logits, got " + shape_str(s));
  check_labels(labels, s[0], s[1]);
}

}  // namespace

template <typename T>
Var<T> cross_entropy(Var<T> logits, const Labels& labels) {
  check_logits(logits, labels);
  return ops::mean(ops::sub(ops::logsumexp_rows(logits), ops::gather_rows(logits, labels)));
}

template <typename T>
Var<T> balanced_softmax_loss(Var<T> logits, const Labels& labels, const ClassCounts& counts, double tau_b) {
  check_logits(logits, labels);
  if (counts.size() < 2) throw ConfigError("balanced softmax needs at least 2 classes");
  if (counts.size() != logits.shape()[1]) {
    throw ShapeError("class counts length " + std::to_string(counts.size()) + " vs logits " + shape_str(logits.shape()));
  }
  const auto prior = counts.log_prior(tau_b);
  Tensor<T> shift(Shape{prior.size()});
  for (std::size_t i = 0; i < prior.size(); ++i) shift[i] = static_cast<T>(prior[i]);
  return cross_entropy(ops::add_row_vector(logits, logits.tape->constant(std::move(shift))), labels);
}

std::vector<double> class_aware_margin(const ClassCounts& counts, double tau_m, double scale, double m0) {
  if (!(scale > 0.0)) throw ConfigError("margin scale must be positive");
  std::vector<double> m(counts.size());
  const double n_min = static_cast<double>(counts.n_min());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    m[i] = (tau_m / scale) * std::log(static_cast<double>(counts[i]) / n_min) + m0;
  }
  return m;
}

template <typename T>
Var<T> margin_bsl_loss(Var<T> cosine, const Labels& labels, const ClassCounts& counts,
                       const std::vector<double>& margins, double scale, double tau_b) {
  check_logits(cosine, labels);
  const std::size_t n = cosine.shape()[0], c = cosine.shape()[1];
  if (counts.size() != c || margins.size() != c) {
    throw ShapeError("class counts / margins length does not match logits " + shape_str(cosine.shape()));
  }
  if (c < 2) throw ConfigError("margin loss needs at least 2 classes");
  const auto prior = counts.log_prior(tau_b);
  Tensor<T> offset(Shape{n, c});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < c; ++i) {
      double v = prior[i];
      if (i == labels[r]) v -= scale * margins[i];
      offset[r * c + i] = static_cast<T>(v);
    }
  }
  auto logits = ops::add(ops::scale(cosine, scale), cosine.tape->constant(std::move(offset)));
  return cross_entropy(logits, labels);
}

template <typename T>
Var<T> kl_divergence(Var<T> p_logits, Var<T> q_logits) {
  if (p_logits.shape() != q_logits.shape() || p_logits.shape().size() != 2) {
    throw ShapeError("kl_divergence shape mismatch " + shape_str(p_logits.shape()) + " vs " + shape_str(q_logits.shape()));
  }
  auto lp = ops::log_softmax_rows(p_logits);
  auto lq = ops::log_softmax_rows(q_logits);
  auto terms = ops::mul(ops::exp(lp), ops::sub(lp, lq));
  return ops::scale(ops::sum(terms), 1.0 / static_cast<double>(p_logits.shape()[0]));
}

template <typename T>
Var<T> trades_objective(Var<T> adv_logits, Var<T> clean_logits, const Labels& labels, double beta,
                        const BaseLoss<T>& base) {
  if (!(beta >= 0.0)) throw ConfigError("TRADES beta must be >= 0");
  auto kl = kl_divergence(adv_logits, clean_logits);
  return ops::add(base(adv_logits, labels), ops::scale(kl, beta));
}

template <typename T>
Var<T> mixup_loss(Var<T> logits, const Labels& labels_a, const Labels& labels_b, double lambda,
                  const BaseLoss<T>& base) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mixup lambda must lie in [0,1]");
  auto la = ops::scale(base(logits, labels_a), lambda);
  auto lb = ops::scale(base(logits, labels_b), 1.0 - lambda);
  return ops::add(la, lb);
}

#define ATLT_INSTANTIATE(T)                                                                              \
  template Var<T> cross_entropy(Var<T>, const Labels&);                                                   \
  template Var<T> balanced_softmax_loss(Var<T>, const Labels&, const ClassCounts&, double);               \
  template Var<T> margin_bsl_loss(Var<T>, const Labels&, const ClassCounts&, const std::vector<double>&, \
                                  double, double);                                                        \
  template Var<T> kl_divergence(Var<T>, Var<T>);                                                          \
  template Var<T> trades_objective(Var<T>, Var<T>, const Labels&, double, const BaseLoss<T>&);            \
  template Var<T> mixup_loss(Var<T>, const Labels&, const Labels&, double, const BaseLoss<T>&);

ATLT_INSTANTIATE(float)
ATLT_INSTANTIATE(double)

#undef ATLT_INSTANTIATE

}  // namespace atlt::losses
