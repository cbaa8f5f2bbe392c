#include "atlt/core/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "atlt/core/errors.hpp"
#include "atlt/simd/kernels.hpp"

namespace atlt {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::AddRowVector: return "add_row_vector";
    case OpKind::AddChannelBias: return "add_channel_bias";
    case OpKind::MatMul: return "matmul";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Relu: return "relu";
    case OpKind::MaxPool2d: return "max_pool2d";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Reshape: return "reshape";
    case OpKind::LogSumExp: return "logsumexp";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Gather: return "gather";
    case OpKind::GatherMaxOther: return "gather_max_other";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::ClampMin: return "clamp_min";
    case OpKind::NormalizeRows: return "normalize_rows";
    case OpKind::NormalizeCols: return "normalize_cols";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

template <typename T>
std::string shapes_of(const std::vector<const Tensor<T>*>& in) {
  std::string s;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i) s += " vs ";
    s += shape_str(in[i]->shape());
  }
  return s;
}

std::size_t arity(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return 0;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::AddRowVector:
    case OpKind::AddChannelBias:
    case OpKind::MatMul:
    case OpKind::Conv2d: return 2;
    default: return 1;
  }
}

bool is_single(const Shape& s) { return shape_numel(s) == 1; }

struct ConvGeom {
  std::size_t n, c, h, w, o, kh, kw, ho, wo, stride, pad;
  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return ho * wo; }
};

ConvGeom conv_geom(OpKind kind, const Shape& x, const Shape& w, const OpAttrs& attrs) {
  if (x.size() != 4 || w.size() != 4) {
    shape_fail(kind, "expects NCHW input and OIHW kernel, got " + shape_str(x) + " vs " + shape_str(w));
  }
  if (x[1] != w[1]) {
    shape_fail(kind, "channel mismatch " + shape_str(x) + " vs " + shape_str(w));
  }
  if (attrs.stride == 0) shape_fail(kind, "stride must be positive");
  ConvGeom g{x[0], x[1], x[2], x[3], w[0], w[2], w[3], 0, 0, attrs.stride, attrs.padding};
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    shape_fail(kind, "kernel larger than padded input " + shape_str(x) + " vs " + shape_str(w));
  }
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

template <typename T>
void im2col(const ConvGeom& g, const T* x, T* col) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.wo + ox] = inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* dx) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dx[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

void check_rows_index(OpKind kind, const Shape& s, const std::vector<std::size_t>& index) {
  if (s.size() != 2) shape_fail(kind, "expects (N,C), got " + shape_str(s));
  if (index.size() != s[0]) {
    shape_fail(kind, "index length " + std::to_string(index.size()) + " vs rows of " + shape_str(s));
  }
  for (auto i : index) {
    if (i >= s[1]) shape_fail(kind, "index " + std::to_string(i) + " out of range for " + shape_str(s));
  }
}

template <typename T>
T row_logsumexp(const T* row, std::size_t c) {
  T m = row[0];
  for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
  if (std::isinf(m)) return m;
  T s = T(0);
  for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
  return m + std::log(s);
}

// Index of max over columns != skip; first occurrence on ties.
template <typename T>
std::size_t row_argmax_other(const T* row, std::size_t c, std::size_t skip) {
  std::size_t best = skip == 0 ? 1 : 0;
  for (std::size_t j = best + 1; j < c; ++j) {
    if (j != skip && row[j] > row[best]) best = j;
  }
  return best;
}

template <typename T>
T floored_norm(T sq, double eps) {
  return std::max(std::sqrt(sq), static_cast<T>(eps));
}

}  // namespace

template <typename T>
Tensor<T> eval_forward(OpKind kind, const std::vector<const Tensor<T>*>& in, const OpAttrs& attrs) {
  if (in.size() != arity(kind)) {
    shape_fail(kind, "expects " + std::to_string(arity(kind)) + " inputs, got " + std::to_string(in.size()));
  }
  const auto& kern = simd::kernels<T>();
  switch (kind) {
    case OpKind::Leaf:
      shape_fail(kind, "leaf has no forward");
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const Tensor<T>& a = *in[0];
      const Tensor<T>& b = *in[1];
      const bool same = a.shape() == b.shape();
      if (!same && !is_single(a.shape()) && !is_single(b.shape())) shape_fail(kind, "shape mismatch " + shapes_of(in));
      const Tensor<T>& big = (same || !is_single(a.shape())) ? a : b;
      Tensor<T> out(big.shape());
      const std::size_t n = out.numel();
      const bool a_bcast = a.numel() != n;
      const bool b_bcast = b.numel() != n;
      for (std::size_t i = 0; i < n; ++i) {
        const T x = a[a_bcast ? 0 : i];
        const T y = b[b_bcast ? 0 : i];
        out[i] = kind == OpKind::Add ? x + y : kind == OpKind::Sub ? x - y : x * y;
      }
      return out;
    }
    case OpKind::Scale:
    case OpKind::AddScalar: {
      Tensor<T> out = *in[0];
      const T c = static_cast<T>(attrs.scalar);
      for (auto& v : out.data()) v = kind == OpKind::Scale ? v * c : v + c;
      return out;
    }
    case OpKind::ClampMin: {
      Tensor<T> out = *in[0];
      const T c = static_cast<T>(attrs.scalar);
      for (auto& v : out.data()) v = std::max(v, c);
      return out;
    }
    case OpKind::AddRowVector: {
      const auto& x = in[0]->shape();
      const auto& b = in[1]->shape();
      if (x.size() != 2 || b.size() != 1 || b[0] != x[1]) shape_fail(kind, "expects (N,C) + (C), got " + shapes_of(in));
      Tensor<T> out = *in[0];
      for (std::size_t i = 0; i < x[0]; ++i)
        for (std::size_t j = 0; j < x[1]; ++j) out[i * x[1] + j] += (*in[1])[j];
      return out;
    }
    case OpKind::AddChannelBias: {
      const auto& x = in[0]->shape();
      const auto& b = in[1]->shape();
      if (x.size() != 4 || b.size() != 1 || b[0] != x[1]) shape_fail(kind, "expects (N,O,H,W) + (O), got " + shapes_of(in));
      Tensor<T> out = *in[0];
      const std::size_t plane = x[2] * x[3];
      for (std::size_t n = 0; n < x[0]; ++n)
        for (std::size_t o = 0; o < x[1]; ++o) {
          T* p = out.ptr() + (n * x[1] + o) * plane;
          const T bo = (*in[1])[o];
          for (std::size_t i = 0; i < plane; ++i) p[i] += bo;
        }
      return out;
    }
    case OpKind::MatMul: {
      const auto& a = in[0]->shape();
      const auto& b = in[1]->shape();
      if (a.size() != 2 || b.size() != 2 || a[1] != b[0]) shape_fail(kind, "inner dimension mismatch " + shapes_of(in));
      Tensor<T> out(Shape{a[0], b[1]});
      kern.gemm(a[0], b[1], a[1], in[0]->ptr(), a[1], in[1]->ptr(), b[1], out.ptr(), b[1], false);
      return out;
    }
    case OpKind::Conv2d: {
      const ConvGeom g = conv_geom(kind, in[0]->shape(), in[1]->shape(), attrs);
      Tensor<T> out(Shape{g.n, g.o, g.ho, g.wo});
      std::vector<T> col(g.k() * g.p());
      for (std::size_t n = 0; n < g.n; ++n) {
        im2col(g, in[0]->ptr() + n * g.c * g.h * g.w, col.data());
        kern.gemm(g.o, g.p(), g.k(), in[1]->ptr(), g.k(), col.data(), g.p(), out.ptr() + n * g.o * g.p(), g.p(), false);
      }
      return out;
    }
    case OpKind::Relu: {
      Tensor<T> out = *in[0];
      for (auto& v : out.data()) v = v > T(0) ? v : T(0);
      return out;
    }
    case OpKind::MaxPool2d: {
      const auto& s = in[0]->shape();
      const std::size_t k = attrs.pool;
      if (s.size() != 4 || k == 0 || s[2] < k || s[3] < k) shape_fail(kind, "window " + std::to_string(k) + " on " + shape_str(s));
      const std::size_t ho = s[2] / k, wo = s[3] / k;
      Tensor<T> out(Shape{s[0], s[1], ho, wo});
      for (std::size_t nc = 0; nc < s[0] * s[1]; ++nc) {
        const T* src = in[0]->ptr() + nc * s[2] * s[3];
        T* dst = out.ptr() + nc * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            T m = -std::numeric_limits<T>::infinity();
            for (std::size_t i = 0; i < k; ++i)
              for (std::size_t j = 0; j < k; ++j) m = std::max(m, src[(oy * k + i) * s[3] + ox * k + j]);
            dst[oy * wo + ox] = m;
          }
      }
      return out;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      T acc = T(0);
      for (auto v : in[0]->data()) acc += v;
      if (kind == OpKind::Mean) acc /= static_cast<T>(in[0]->numel());
      return Tensor<T>::scalar(acc);
    }
    case OpKind::Reshape:
      if (shape_numel(attrs.shape) != in[0]->numel()) shape_fail(kind, shape_str(in[0]->shape()) + " -> " + shape_str(attrs.shape));
      return in[0]->reshaped(attrs.shape);
    case OpKind::LogSumExp:
    case OpKind::LogSoftmax: {
      const auto& s = in[0]->shape();
      if (s.size() != 2) shape_fail(kind, "expects (N,C), got " + shape_str(s));
      if (kind == OpKind::LogSumExp) {
        Tensor<T> out(Shape{s[0]});
        for (std::size_t i = 0; i < s[0]; ++i) out[i] = row_logsumexp(in[0]->ptr() + i * s[1], s[1]);
        return out;
      }
      Tensor<T> out = *in[0];
      for (std::size_t i = 0; i < s[0]; ++i) {
        T* row = out.ptr() + i * s[1];
        const T lse = row_logsumexp(row, s[1]);
        for (std::size_t j = 0; j < s[1]; ++j) row[j] -= lse;
      }
      return out;
    }
    case OpKind::Gather:
    case OpKind::GatherMaxOther: {
      const auto& s = in[0]->shape();
      check_rows_index(kind, s, attrs.index);
      if (kind == OpKind::GatherMaxOther && s[1] < 2) shape_fail(kind, "needs at least 2 columns, got " + shape_str(s));
      Tensor<T> out(Shape{s[0]});
      for (std::size_t i = 0; i < s[0]; ++i) {
        const T* row = in[0]->ptr() + i * s[1];
        out[i] = kind == OpKind::Gather ? row[attrs.index[i]] : row[row_argmax_other(row, s[1], attrs.index[i])];
      }
      return out;
    }
    case OpKind::Exp: {
      Tensor<T> out = *in[0];
      for (auto& v : out.data()) v = std::exp(v);
      return out;
    }
    case OpKind::Log: {
      Tensor<T> out = *in[0];
      for (auto& v : out.data()) v = std::log(v);
      return out;
    }
    case OpKind::NormalizeRows:
    case OpKind::NormalizeCols: {
      const auto& s = in[0]->shape();
      if (s.size() != 2) shape_fail(kind, "expects a matrix, got " + shape_str(s));
      Tensor<T> out = *in[0];
      const std::size_t rows = s[0], cols = s[1];
      if (kind == OpKind::NormalizeRows) {
        for (std::size_t i = 0; i < rows; ++i) {
          T* r = out.ptr() + i * cols;
          const T norm = floored_norm(kern.dot(cols, r, r), attrs.scalar);
          for (std::size_t j = 0; j < cols; ++j) r[j] /= norm;
        }
      } else {
        for (std::size_t j = 0; j < cols; ++j) {
          T sq = T(0);
          for (std::size_t i = 0; i < rows; ++i) sq += out[i * cols + j] * out[i * cols + j];
          const T norm = floored_norm(sq, attrs.scalar);
          for (std::size_t i = 0; i < rows; ++i) out[i * cols + j] /= norm;
        }
      }
      return out;
    }
  }
  shape_fail(kind, "unhandled op");
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::apply(OpKind kind, const std::vector<Var<T>>& inputs, OpAttrs attrs) {
  std::vector<const Tensor<T>*> values;
  values.reserve(inputs.size());
  bool any_grad = false;
  for (const auto& v : inputs) {
    if (v.tape != this) throw ShapeError(std::string(op_name(kind)) + ": input from a different tape");
    values.push_back(&nodes_.at(v.id).value);
    any_grad = any_grad || nodes_[v.id].requires_grad;
  }
  Tensor<T> out = eval_forward(kind, values, attrs);
  if (!any_grad) return leaf(std::move(out), false);
  Node node;
  node.op = kind;
  for (const auto& v : inputs) node.inputs.push_back(v.id);
  node.attrs = std::move(attrs);
  node.value = std::move(out);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
std::vector<T>& Tape<T>::grad_buffer(std::size_t id) {
  auto& g = nodes_[id].grad;
  if (g.empty()) g.assign(nodes_[id].value.numel(), T(0));
  return g;
}

template <typename T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& node = nodes_.at(v.id);
  if (node.grad.empty()) return Tensor<T>(node.value.shape(), T(0));
  return Tensor<T>(node.value.shape(), node.grad);
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw ShapeError("backward: loss from a different tape");
  const Node& root = nodes_.at(loss.id);
  if (root.value.rank() != 0) throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(root.value.shape()));
  for (auto& node : nodes_) node.grad.clear();
  if (!root.requires_grad) return;
  grad_buffer(loss.id)[0] = T(1);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.op == OpKind::Leaf || node.grad.empty()) continue;
    backward_node(id);
  }
}

template <typename T>
void Tape<T>::backward_node(std::size_t id) {
  // Copy what we need: grad_buffer() on inputs may not reallocate nodes_, but
  // keep references local and explicit.
  const Node& node = nodes_[id];
  const std::vector<T>& dy = node.grad;
  const auto& kern = simd::kernels<T>();
  const auto needs = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };
  const auto in_value = [&](std::size_t k) -> const Tensor<T>& { return nodes_[node.inputs[k]].value; };

  switch (node.op) {
    case OpKind::Leaf:
      return;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const std::size_t n = node.value.numel();
      for (std::size_t k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        auto& dx = grad_buffer(node.inputs[k]);
        const bool bcast = dx.size() != n;
        const T sign = (node.op == OpKind::Sub && k == 1) ? T(-1) : T(1);
        const Tensor<T>& other = in_value(1 - k);
        const bool other_bcast = other.numel() != n;
        for (std::size_t i = 0; i < n; ++i) {
          T g = dy[i] * sign;
          if (node.op == OpKind::Mul) g = dy[i] * other[other_bcast ? 0 : i];
          dx[bcast ? 0 : i] += g;
        }
      }
      return;
    }
    case OpKind::Scale: {
      auto& dx = grad_buffer(node.inputs[0]);
      kern.axpy(dy.size(), static_cast<T>(node.attrs.scalar), dy.data(), dx.data());
      return;
    }
    case OpKind::AddScalar:
    case OpKind::Reshape: {
      auto& dx = grad_buffer(node.inputs[0]);
      kern.axpy(dy.size(), T(1), dy.data(), dx.data());
      return;
    }
    case OpKind::ClampMin: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      const T c = static_cast<T>(node.attrs.scalar);
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (x[i] > c) dx[i] += dy[i];
      return;
    }
    case OpKind::AddRowVector: {
      const auto& s = node.value.shape();
      if (needs(0)) kern.axpy(dy.size(), T(1), dy.data(), grad_buffer(node.inputs[0]).data());
      if (needs(1)) {
        auto& db = grad_buffer(node.inputs[1]);
        for (std::size_t i = 0; i < s[0]; ++i)
          for (std::size_t j = 0; j < s[1]; ++j) db[j] += dy[i * s[1] + j];
      }
      return;
    }
    case OpKind::AddChannelBias: {
      const auto& s = node.value.shape();
      if (needs(0)) kern.axpy(dy.size(), T(1), dy.data(), grad_buffer(node.inputs[0]).data());
      if (needs(1)) {
        auto& db = grad_buffer(node.inputs[1]);
        const std::size_t plane = s[2] * s[3];
        for (std::size_t n = 0; n < s[0]; ++n)
          for (std::size_t o = 0; o < s[1]; ++o) {
            const T* p = dy.data() + (n * s[1] + o) * plane;
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            db[o] += acc;
          }
      }
      return;
    }
    case OpKind::MatMul: {
      const Tensor<T>& a = in_value(0);
      const Tensor<T>& b = in_value(1);
      const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
      if (needs(0)) {
        const auto bt = transpose(b.ptr(), k, n);
        kern.gemm(m, k, n, dy.data(), n, bt.data(), k, grad_buffer(node.inputs[0]).data(), k, true);
      }
      if (needs(1)) {
        const auto at = transpose(a.ptr(), m, k);
        kern.gemm(k, n, m, at.data(), m, dy.data(), n, grad_buffer(node.inputs[1]).data(), n, true);
      }
      return;
    }
    case OpKind::Conv2d: {
      const Tensor<T>& x = in_value(0);
      const Tensor<T>& w = in_value(1);
      const ConvGeom g = conv_geom(node.op, x.shape(), w.shape(), node.attrs);
      const std::size_t kk = g.k(), p = g.p();
      std::vector<T> col(kk * p);
      std::vector<T> wt;
      std::vector<T> dcol;
      T* dx = needs(0) ? grad_buffer(node.inputs[0]).data() : nullptr;
      T* dw = needs(1) ? grad_buffer(node.inputs[1]).data() : nullptr;
      if (dx) {
        wt = transpose(w.ptr(), g.o, kk);
        dcol.resize(kk * p);
      }
      for (std::size_t n = 0; n < g.n; ++n) {
        const T* dyn = dy.data() + n * g.o * p;
        if (dw) {
          im2col(g, x.ptr() + n * g.c * g.h * g.w, col.data());
          const auto colt = transpose(col.data(), kk, p);
          kern.gemm(g.o, kk, p, dyn, p, colt.data(), kk, dw, kk, true);
        }
        if (dx) {
          kern.gemm(kk, p, g.o, wt.data(), g.o, dyn, p, dcol.data(), p, false);
          col2im_add(g, dcol.data(), dx + n * g.c * g.h * g.w);
        }
      }
      return;
    }
    case OpKind::Relu: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (x[i] > T(0)) dx[i] += dy[i];
      return;
    }
    case OpKind::MaxPool2d: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      const auto& s = x.shape();
      const std::size_t k = node.attrs.pool;
      const std::size_t ho = s[2] / k, wo = s[3] / k;
      for (std::size_t nc = 0; nc < s[0] * s[1]; ++nc) {
        const T* src = x.ptr() + nc * s[2] * s[3];
        T* dst = dx.data() + nc * s[2] * s[3];
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            std::size_t best = (oy * k) * s[3] + ox * k;
            for (std::size_t i = 0; i < k; ++i)
              for (std::size_t j = 0; j < k; ++j) {
                const std::size_t at = (oy * k + i) * s[3] + ox * k + j;
                if (src[at] > src[best]) best = at;
              }
            dst[best] += dy[nc * ho * wo + oy * wo + ox];
          }
      }
      return;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      auto& dx = grad_buffer(node.inputs[0]);
      T g = dy[0];
      if (node.op == OpKind::Mean) g /= static_cast<T>(dx.size());
      for (auto& v : dx) v += g;
      return;
    }
    case OpKind::LogSumExp: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      const std::size_t rows = x.dim(0), cols = x.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        const T lse = node.value[i];
        for (std::size_t j = 0; j < cols; ++j) dx[i * cols + j] += dy[i] * std::exp(x[i * cols + j] - lse);
      }
      return;
    }
    case OpKind::LogSoftmax: {
      auto& dx = grad_buffer(node.inputs[0]);
      const std::size_t rows = node.value.dim(0), cols = node.value.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        T total = T(0);
        for (std::size_t j = 0; j < cols; ++j) total += dy[i * cols + j];
        for (std::size_t j = 0; j < cols; ++j) {
          dx[i * cols + j] += dy[i * cols + j] - std::exp(node.value[i * cols + j]) * total;
        }
      }
      return;
    }
    case OpKind::Gather:
    case OpKind::GatherMaxOther: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      const std::size_t cols = x.dim(1);
      for (std::size_t i = 0; i < x.dim(0); ++i) {
        const std::size_t j = node.op == OpKind::Gather
                                  ? node.attrs.index[i]
                                  : row_argmax_other(x.ptr() + i * cols, cols, node.attrs.index[i]);
        dx[i * cols + j] += dy[i];
      }
      return;
    }
    case OpKind::Exp: {
      auto& dx = grad_buffer(node.inputs[0]);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * node.value[i];
      return;
    }
    case OpKind::Log: {
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] / x[i];
      return;
    }
    case OpKind::NormalizeRows:
    case OpKind::NormalizeCols: {
      // y = x / max(|x|, eps). Above the floor: dx = (dy - y (y.dy)) / |x|.
      // On the floor the divisor is constant: dx = dy / eps.
      auto& dx = grad_buffer(node.inputs[0]);
      const Tensor<T>& x = in_value(0);
      const std::size_t rows = x.dim(0), cols = x.dim(1);
      const bool by_row = node.op == OpKind::NormalizeRows;
      const std::size_t groups = by_row ? rows : cols;
      const std::size_t len = by_row ? cols : rows;
      const auto at = [&](std::size_t gidx, std::size_t e) { return by_row ? gidx * cols + e : e * cols + gidx; };
      const T eps = static_cast<T>(node.attrs.scalar);
      for (std::size_t gi = 0; gi < groups; ++gi) {
        T sq = T(0);
        T ydy = T(0);
        for (std::size_t e = 0; e < len; ++e) {
          sq += x[at(gi, e)] * x[at(gi, e)];
          ydy += node.value[at(gi, e)] * dy[at(gi, e)];
        }
        const T norm = std::sqrt(sq);
        if (norm > eps) {
          for (std::size_t e = 0; e < len; ++e) dx[at(gi, e)] += (dy[at(gi, e)] - node.value[at(gi, e)] * ydy) / norm;
        } else {
          for (std::size_t e = 0; e < len; ++e) dx[at(gi, e)] += dy[at(gi, e)] / eps;
        }
      }
      return;
    }
  }
}

template Tensor<float> eval_forward<float>(OpKind, const std::vector<const Tensor<float>*>&, const OpAttrs&);
template Tensor<double> eval_forward<double>(OpKind, const std::vector<const Tensor<double>*>&, const OpAttrs&);
template class Tape<float>;
template class Tape<double>;

}  // namespace atlt
