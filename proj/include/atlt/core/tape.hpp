#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "atlt/core/tensor.hpp"

namespace atlt {

// Primitive operation set. Shapes:
//   Add/Sub/Mul         equal shapes, or either side a single-element tensor
//   Scale/AddScalar     x * c, x + c with c = attrs.scalar
//   AddRowVector        (N,C) + (C)
//   AddChannelBias      (N,O,H,W) + (O)
//   MatMul              (M,K) x (K,N)
//   Conv2d              NCHW input, OIHW kernel, attrs.stride / attrs.padding
//   MaxPool2d           NCHW, square window attrs.pool with equal stride
//   Sum/Mean            any -> scalar
//   Reshape             attrs.shape, same element count
//   LogSumExp           (N,C) -> (N), row-wise
//   LogSoftmax          (N,C) -> (N,C), row-wise
//   Gather              (N,C) -> (N), picks column attrs.index[n] of row n
//   GatherMaxOther      (N,C) -> (N), max over columns != attrs.index[n]
//   ClampMin            max(x, attrs.scalar)
//   NormalizeRows/Cols  divide each row/column by max(l2 norm, attrs.scalar)
enum class OpKind {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  AddRowVector,
  AddChannelBias,
  MatMul,
  Conv2d,
  Relu,
  MaxPool2d,
  Sum,
  Mean,
  Reshape,
  LogSumExp,
  LogSoftmax,
  Gather,
  GatherMaxOther,
  Exp,
  Log,
  ClampMin,
  NormalizeRows,
  NormalizeCols,
};

std::string_view op_name(OpKind kind);

struct OpAttrs {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t pool = 2;
  double scalar = 0.0;
  std::vector<std::size_t> index;
  Shape shape;
};

// Forward evaluation of one primitive, without recording. Throws ShapeError
// naming the op and the offending shapes.
template <typename T>
Tensor<T> eval_forward(OpKind kind, const std::vector<const Tensor<T>*>& inputs, const OpAttrs& attrs = {});

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives and
// has not been cleared.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order and the graph is acyclic by
/// construction. An operation whose inputs all lack requires_grad is stored
/// as a constant leaf and never visited by backward().
template <typename T>
class Tape {
 public:
  Var<T> leaf(Tensor<T> value, bool requires_grad);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }
  Var<T> apply(OpKind kind, const std::vector<Var<T>>& inputs, OpAttrs attrs = {});

  // Fills gradients of `loss` (rank-0) for every requires_grad node. Nodes off
  // the path to the loss end with a zero gradient.
  void backward(Var<T> loss);

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }
  Tensor<T> grad(Var<T> v) const;
  OpKind kind(Var<T> v) const { return nodes_.at(v.id).op; }
  const std::vector<std::size_t>& inputs(Var<T> v) const { return nodes_.at(v.id).inputs; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<T> grad;  // empty until reached by backward
  };

  void backward_node(std::size_t id);
  std::vector<T>& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(*this);
}

// Recording wrappers, one per primitive.
namespace ops {

template <typename T> Var<T> add(Var<T> a, Var<T> b) { return a.tape->apply(OpKind::Add, {a, b}); }
template <typename T> Var<T> sub(Var<T> a, Var<T> b) { return a.tape->apply(OpKind::Sub, {a, b}); }
template <typename T> Var<T> mul(Var<T> a, Var<T> b) { return a.tape->apply(OpKind::Mul, {a, b}); }
template <typename T> Var<T> matmul(Var<T> a, Var<T> b) { return a.tape->apply(OpKind::MatMul, {a, b}); }
template <typename T> Var<T> relu(Var<T> x) { return x.tape->apply(OpKind::Relu, {x}); }
template <typename T> Var<T> sum(Var<T> x) { return x.tape->apply(OpKind::Sum, {x}); }
template <typename T> Var<T> mean(Var<T> x) { return x.tape->apply(OpKind::Mean, {x}); }
template <typename T> Var<T> exp(Var<T> x) { return x.tape->apply(OpKind::Exp, {x}); }
template <typename T> Var<T> log(Var<T> x) { return x.tape->apply(OpKind::Log, {x}); }
template <typename T> Var<T> logsumexp_rows(Var<T> x) { return x.tape->apply(OpKind::LogSumExp, {x}); }
template <typename T> Var<T> log_softmax_rows(Var<T> x) { return x.tape->apply(OpKind::LogSoftmax, {x}); }

template <typename T>
Var<T> add_row_vector(Var<T> x, Var<T> b) {
  return x.tape->apply(OpKind::AddRowVector, {x, b});
}

template <typename T>
Var<T> add_channel_bias(Var<T> x, Var<T> b) {
  return x.tape->apply(OpKind::AddChannelBias, {x, b});
}

template <typename T>
Var<T> scale(Var<T> x, double c) {
  OpAttrs a;
  a.scalar = c;
  return x.tape->apply(OpKind::Scale, {x}, std::move(a));
}

template <typename T>
Var<T> add_scalar(Var<T> x, double c) {
  OpAttrs a;
  a.scalar = c;
  return x.tape->apply(OpKind::AddScalar, {x}, std::move(a));
}

template <typename T>
Var<T> clamp_min(Var<T> x, double c) {
  OpAttrs a;
  a.scalar = c;
  return x.tape->apply(OpKind::ClampMin, {x}, std::move(a));
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, std::size_t stride, std::size_t padding) {
  OpAttrs a;
  a.stride = stride;
  a.padding = padding;
  return x.tape->apply(OpKind::Conv2d, {x, w}, std::move(a));
}

template <typename T>
Var<T> max_pool2d(Var<T> x, std::size_t window) {
  OpAttrs a;
  a.pool = window;
  return x.tape->apply(OpKind::MaxPool2d, {x}, std::move(a));
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  OpAttrs a;
  a.shape = std::move(shape);
  return x.tape->apply(OpKind::Reshape, {x}, std::move(a));
}

template <typename T>
Var<T> gather_rows(Var<T> x, std::vector<std::size_t> index) {
  OpAttrs a;
  a.index = std::move(index);
  return x.tape->apply(OpKind::Gather, {x}, std::move(a));
}

template <typename T>
Var<T> gather_max_other(Var<T> x, std::vector<std::size_t> index) {
  OpAttrs a;
  a.index = std::move(index);
  return x.tape->apply(OpKind::GatherMaxOther, {x}, std::move(a));
}

template <typename T>
Var<T> normalize_rows(Var<T> x, double eps) {
  OpAttrs a;
  a.scalar = eps;
  return x.tape->apply(OpKind::NormalizeRows, {x}, std::move(a));
}

template <typename T>
Var<T> normalize_cols(Var<T> x, double eps) {
  OpAttrs a;
  a.scalar = eps;
  return x.tape->apply(OpKind::NormalizeCols, {x}, std::move(a));
}

}  // namespace ops

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace atlt
